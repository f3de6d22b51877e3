// Trial-session view state: a fold over engine messages.
//
// The engine owns the triggers, the prompts and the reports; this
// class mirrors them into something a render loop can draw.  The one
// rule it enforces locally is the indicator coupling: within a trial,
// red "Explore" may turn green "Move On" once and never back.

import {
  EngineMessage,
  PROTOCOL,
  RatingStage,
  decodeGraymap,
} from "./protocol.js";

export type Phase =
  | "idle"
  | "fixation_cross"
  | "searching"
  | "map_interlude"
  | "person_rating"
  | "weapon_rating"
  | "feedbackless_advance";

export type Indicator = "explore_red" | "move_on_green";

export interface Overlay {
  values: Float32Array;
  width: number;
  height: number;
  shownAtMs: number; // wall clock at receipt
  durationMs: number; // engine-commanded; the view adds nothing
}

export interface SessionStats {
  n_trials: number;
  n_complete: number;
  mean_trial_time_s: number | null;
  person_hit_rate: number | null;
  person_fa_rate: number | null;
  weapon_hit_rate: number | null;
  weapon_fa_rate: number | null;
  mean_general_offset_ms: number | null;
}

export class TrialView {
  phase: Phase = "idle";
  indicator: Indicator = "explore_red";
  indicatorChanges = 0; // per trial; the tests pin this to <= 1
  overlay: Overlay | null = null;
  report: Record<string, unknown> | null = null;
  reports: Record<string, unknown>[] = [];
  error: string | null = null;
  helloSeen = false;
  private promptedStage: RatingStage | null = null;

  // Controller hooks: the cross and the stimulus onset are the
  // client's presentation steps, everything after is engine-driven.
  beginTrial(): void {
    this.phase = "fixation_cross";
    this.indicator = "explore_red";
    this.indicatorChanges = 0;
    this.overlay = null;
    this.report = null;
    this.error = null;
    this.promptedStage = null;
  }

  trialStarted(): void {
    this.phase = "searching";
  }

  halt(message: string): void {
    this.error = message;
    this.phase = "idle";
    this.overlay = null;
    this.promptedStage = null;
  }

  disconnected(): void {
    this.halt(this.inTrial() ? "connection lost mid-trial" : "connection closed");
  }

  inTrial(): boolean {
    return (
      this.phase === "searching" ||
      this.phase === "map_interlude" ||
      this.phase === "person_rating" ||
      this.phase === "weapon_rating"
    );
  }

  inSearch(): boolean {
    return this.phase === "searching" || this.phase === "map_interlude";
  }

  handleMessage(msg: EngineMessage, nowMs: number): void {
    switch (msg.type) {
      case "hello":
        if (msg.protocol !== PROTOCOL) {
          this.halt("protocol mismatch: engine speaks " + msg.protocol);
        } else {
          this.helloSeen = true;
        }
        return;
      case "state":
        if (msg.state === "move_on" && this.indicator === "explore_red") {
          this.indicator = "move_on_green";
          this.indicatorChanges++;
        }
        // an "explore" after move_on would flip the light back; the
        // engine latches and so does the view
        return;
      case "exploration_map":
        this.overlay = {
          values: decodeGraymap(msg),
          width: msg.width,
          height: msg.height,
          shownAtMs: nowMs,
          durationMs: msg.duration_ms,
        };
        if (this.phase === "searching") {
          this.phase = "map_interlude";
        }
        return;
      case "prompt":
        this.overlay = null;
        this.promptedStage = msg.stage;
        this.phase = msg.stage === "person" ? "person_rating" : "weapon_rating";
        return;
      case "trial_report":
        this.report = msg.report;
        this.reports.push(msg.report);
        this.overlay = null;
        this.promptedStage = null;
        this.phase = "feedbackless_advance";
        return;
      case "error":
        this.halt(msg.message);
        return;
    }
  }

  // Advance presentation time: the overlay stays up for exactly the
  // engine-commanded duration, then the search display returns.
  tick(nowMs: number): void {
    if (this.overlay !== null && nowMs - this.overlay.shownAtMs >= this.overlay.durationMs) {
      this.overlay = null;
      if (this.phase === "map_interlude") {
        this.phase = "searching";
      }
    }
  }

  overlayVisible(nowMs: number): boolean {
    return this.overlay !== null && nowMs - this.overlay.shownAtMs < this.overlay.durationMs;
  }

  // Rating clicks only count while the engine's prompt is open; one
  // answer closes it until the next prompt (clicks before a prompt or
  // repeats are ignored, and nothing is echoed back as feedback).
  submitRating(): RatingStage | null {
    if (this.promptedStage === null) {
      return null;
    }
    const stage = this.promptedStage;
    this.promptedStage = null;
    return stage;
  }

  pendingStage(): RatingStage | null {
    return this.promptedStage;
  }

  // Running session stats, aggregated the same way the engine's own
  // report aggregation does: times over finished searches, rates over
  // complete trials and only when both truth classes are present.
  stats(): SessionStats {
    const ended = this.reports.filter((r) => r["user_action"] != null);
    const complete = this.reports.filter((r) => r["complete"] === true);
    const rates = (presentKey: string, responseKey: string): [number | null, number | null] => {
      const present = complete.filter((r) => r[presentKey] === true);
      const absent = complete.filter((r) => r[presentKey] === false);
      if (present.length === 0 || absent.length === 0) {
        return [null, null];
      }
      const hit = present.filter((r) => r[responseKey] === true).length / present.length;
      const fa = absent.filter((r) => r[responseKey] === true).length / absent.length;
      return [hit, fa];
    };
    const [personHit, personFa] = rates("person_present", "person_response_present");
    const [weaponHit, weaponFa] = rates("weapon_present", "weapon_response_present");
    const offsets = ended
      .map((r) => r["general_offset_ms"])
      .filter((v): v is number => typeof v === "number");
    return {
      n_trials: this.reports.length,
      n_complete: complete.length,
      mean_trial_time_s:
        ended.length === 0
          ? null
          : ended.reduce((s, r) => s + (r["duration_ms"] as number), 0) / ended.length / 1000,
      person_hit_rate: personHit,
      person_fa_rate: personFa,
      weapon_hit_rate: weaponHit,
      weapon_fa_rate: weaponFa,
      mean_general_offset_ms:
        offsets.length === 0 ? null : offsets.reduce((s, v) => s + v, 0) / offsets.length,
    };
  }
}
