import { readFileSync } from "node:fs";

import { describe, expect, it } from "vitest";

import { EngineMessage, ExplorationMapMessage, parseEngineMessage } from "../src/protocol.js";
import { Phase, TrialView } from "../src/session.js";
import { MouseGaze, TrialClock } from "../src/gaze.js";
import { indicatorLabel } from "../src/render.js";

// Recorded wire transcripts: seeded synthetic observers driven through
// the live service (scripts/record_live_fixtures.py).  The suite
// replays real engine output, so what it pins down is the contract,
// not this client's assumptions about it.
interface Entry {
  from: "client" | "engine";
  text?: string;
  gaze?: number;
}

interface Session {
  label: string;
  entries: Entry[];
}

const fixtures: { protocol: string; sessions: Session[] } = JSON.parse(
  readFileSync(new URL("./fixtures/transcripts.json", import.meta.url), "utf-8"),
);

function session(label: string): Session {
  const found = fixtures.sessions.find((s) => s.label === label);
  if (!found) throw new Error("no fixture session " + label);
  return found;
}

interface Replay {
  view: TrialView;
  // one record per engine message: which trial it fell in and the
  // indicator right after the view folded it in
  trace: { trial: number; type: string; indicator: string; phase: Phase }[];
  trials: number;
}

function replay(s: Session): Replay {
  const view = new TrialView();
  const trace: Replay["trace"] = [];
  let trial = -1;
  for (const entry of s.entries) {
    if (entry.from === "client") {
      if (entry.gaze !== undefined) continue; // gaze runs: no view change
      const record = JSON.parse(entry.text!);
      if (record.kind === "trial_start") {
        trial++;
        view.beginTrial();
        view.trialStarted();
      }
    } else {
      const msg = parseEngineMessage(entry.text!);
      const now = "t_ms" in msg ? (msg as { t_ms: number }).t_ms : 0;
      view.handleMessage(msg, now);
      trace.push({ trial: trial, type: msg.type, indicator: view.indicator, phase: view.phase });
    }
  }
  return { view: view, trace: trace, trials: trial + 1 };
}

describe("replaying recorded engine transcripts", () => {
  it("every wire entry parses", () => {
    expect(fixtures.protocol).toBe("aaad-live/1");
    for (const s of fixtures.sessions) {
      for (const entry of s.entries) {
        if (entry.from === "engine") {
          expect(() => parseEngineMessage(entry.text!)).not.toThrow();
        } else if (entry.text !== undefined) {
          const kind = JSON.parse(entry.text).kind;
          expect(["trial_start", "gaze", "key", "rating", "trial_end"]).toContain(kind);
        }
      }
    }
  });

  it("indicator goes red→green at most once per trial, never back", () => {
    let greens = 0;
    for (const s of fixtures.sessions) {
      const { trace, trials } = replay(s);
      for (let t = 0; t < trials; t++) {
        const colors = trace.filter((e) => e.trial === t).map((e) => e.indicator);
        const flips = colors.filter(
          (c, i) => i > 0 && c !== colors[i - 1],
        );
        // monotone: at most one change and only towards green
        expect(flips.length).toBeLessThanOrEqual(1);
        if (flips.length === 1) {
          expect(flips[0]).toBe("move_on_green");
          greens++;
        }
        expect(colors[0]).toBe("explore_red");
      }
    }
    expect(greens).toBeGreaterThanOrEqual(4); // property is not vacuous
  });

  it("aided trials that reach the recommendation flip exactly once", () => {
    const { view, trace } = replay(session("satisfied_advance"));
    const states = trace.filter((e) => e.type === "state");
    expect(states.map((e) => e.indicator)).toEqual(["explore_red", "move_on_green"]);
    expect(view.indicatorChanges).toBe(1);
    expect(view.report!["user_action"]).toBe("satisfied_advance");
  });

  it("trials stopped early keep the indicator red throughout", () => {
    const { view, trace } = replay(session("forced_advance"));
    expect(trace.every((e) => e.indicator === "explore_red")).toBe(true);
    expect(view.indicatorChanges).toBe(0);
    expect(view.report!["user_action"]).toBe("forced_advance");
  });

  it("shadow trials show nothing but still report the trigger", () => {
    const { view, trace } = replay(session("shadow_aid_hidden"));
    expect(trace.filter((e) => e.type === "state")).toEqual([]);
    expect(view.indicatorChanges).toBe(0);
    expect(view.report!["general_trigger_ms"]).not.toBeNull();
  });

  it("phases follow the trial flow the engine drives", () => {
    const { trace } = replay(session("satisfied_advance"));
    const phases = trace.filter((e) => e.trial === 0).map((e) => e.phase);
    expect(phases[0]).toBe("searching"); // state explore arrives mid-search
    expect(phases).toContain("person_rating");
    expect(phases).toContain("weapon_rating");
    expect(phases[phases.length - 1]).toBe("feedbackless_advance");
    expect(phases.indexOf("person_rating")).toBeLessThan(phases.indexOf("weapon_rating"));
  });

  it("map interludes carry the engine-commanded duration and real payloads", () => {
    const s = session("map_requests");
    const maps = s.entries
      .filter((e) => e.from === "engine")
      .map((e) => parseEngineMessage(e.text!))
      .filter((m): m is ExplorationMapMessage => m.type === "exploration_map");
    expect(maps.length).toBe(2);
    for (const msg of maps) {
      const view = new TrialView();
      view.beginTrial();
      view.trialStarted();
      view.handleMessage(msg, 5000);
      expect(view.phase).toBe("map_interlude");
      // duration is whatever the engine said, not a client constant
      expect(view.overlay!.durationMs).toBe(msg.duration_ms);
      const values = view.overlay!.values;
      expect(values.length).toBe(msg.width * msg.height);
      for (const v of values) {
        expect(v).toBeGreaterThanOrEqual(0);
        expect(v).toBeLessThanOrEqual(1);
      }
    }
  });

  it("running stats match an independent fold over the engine's reports", () => {
    const { view } = replay(session("three_trial_session"));
    expect(view.reports.length).toBe(3);

    // recompute from the fixture's own report dicts
    const reports = view.reports;
    const mean = (vals: number[]) => vals.reduce((a, b) => a + b, 0) / vals.length;
    const rate = (presentKey: string, respKey: string, want: boolean) => {
      const rows = reports.filter((r) => r["complete"] === true && r[presentKey] === want);
      return rows.filter((r) => r[respKey] === true).length / rows.length;
    };
    const stats = view.stats();
    expect(stats.n_trials).toBe(3);
    expect(stats.n_complete).toBe(3);
    expect(stats.mean_trial_time_s).toBeCloseTo(
      mean(reports.map((r) => r["duration_ms"] as number)) / 1000,
      12,
    );
    expect(stats.person_hit_rate).toBe(rate("person_present", "person_response_present", true));
    expect(stats.person_fa_rate).toBe(rate("person_present", "person_response_present", false));
    expect(stats.weapon_hit_rate).toBe(rate("weapon_present", "weapon_response_present", true));
    expect(stats.weapon_fa_rate).toBe(rate("weapon_present", "weapon_response_present", false));
    expect(stats.mean_general_offset_ms).toBeCloseTo(
      mean(reports.map((r) => r["general_offset_ms"] as number)),
      12,
    );
  });
});

function mapMessage(durationMs: number): ExplorationMapMessage {
  return {
    type: "exploration_map",
    t_ms: 400,
    width: 1,
    height: 1,
    duration_ms: durationMs,
    data_b64: Buffer.from([0xff, 0xff]).toString("base64"),
  };
}

describe("view behavior the protocol cannot show directly", () => {
  it("overlay stays up for exactly the commanded duration, whatever it is", () => {
    for (const duration of [75, 120]) {
      const view = new TrialView();
      view.beginTrial();
      view.trialStarted();
      view.handleMessage(mapMessage(duration), 1000);
      expect(view.overlayVisible(1000)).toBe(true);
      expect(view.overlayVisible(1000 + duration - 1)).toBe(true);
      expect(view.overlayVisible(1000 + duration)).toBe(false);
      view.tick(1000 + duration - 1);
      expect(view.phase).toBe("map_interlude");
      view.tick(1000 + duration);
      expect(view.phase).toBe("searching");
      expect(view.overlay).toBeNull();
    }
  });

  it("indicator latches even against an out-of-contract explore", () => {
    const view = new TrialView();
    view.beginTrial();
    view.trialStarted();
    const moveOn: EngineMessage = { type: "state", t_ms: 900, state: "move_on" };
    const explore: EngineMessage = { type: "state", t_ms: 950, state: "explore" };
    view.handleMessage(moveOn, 900);
    view.handleMessage(explore, 950);
    expect(view.indicator).toBe("move_on_green");
    expect(view.indicatorChanges).toBe(1);
  });

  it("ratings are ignored before a prompt and cannot double-send", () => {
    const view = new TrialView();
    view.beginTrial();
    view.trialStarted();
    expect(view.submitRating()).toBeNull(); // click before any prompt
    view.handleMessage({ type: "prompt", t_ms: 1500, stage: "person" }, 1500);
    expect(view.phase).toBe("person_rating");
    expect(view.submitRating()).toBe("person");
    expect(view.submitRating()).toBeNull(); // double click, one message
    view.handleMessage({ type: "prompt", t_ms: 1600, stage: "weapon" }, 1600);
    expect(view.submitRating()).toBe("weapon");
  });

  it("input forwarding stops once the report arrives", () => {
    const view = new TrialView();
    view.beginTrial();
    view.trialStarted();
    expect(view.inSearch()).toBe(true);
    view.handleMessage({ type: "trial_report", t_ms: 2000, report: { complete: false } }, 2000);
    expect(view.inSearch()).toBe(false);
    expect(view.inTrial()).toBe(false);
  });

  it("engine errors and disconnects halt the trial with a banner", () => {
    const view = new TrialView();
    view.beginTrial();
    view.trialStarted();
    view.handleMessage({ type: "error", message: "rating.value must be an integer" }, 100);
    expect(view.error).toMatch(/must be an integer/);
    expect(view.phase).toBe("idle");

    const second = new TrialView();
    second.beginTrial();
    second.trialStarted();
    second.disconnected();
    expect(second.error).toBe("connection lost mid-trial");

    const idle = new TrialView();
    idle.disconnected();
    expect(idle.error).toBe("connection closed");
  });

  it("a protocol mismatch in the hello halts the session", () => {
    const view = new TrialView();
    view.handleMessage({ type: "hello", protocol: "aaad-live/2" }, 0);
    expect(view.error).toMatch(/protocol mismatch/);
    const ok = new TrialView();
    ok.handleMessage({ type: "hello", protocol: "aaad-live/1" }, 0);
    expect(ok.error).toBeNull();
    expect(ok.helloSeen).toBe(true);
  });

  it("indicator label couples text and color", () => {
    expect(indicatorLabel("explore_red").text).toBe("Explore");
    expect(indicatorLabel("move_on_green").text).toBe("Move On");
    expect(indicatorLabel("explore_red").color).not.toBe(indicatorLabel("move_on_green").color);
  });
});

describe("mouse-as-gaze plumbing", () => {
  it("trial clock measures from its epoch and refuses to run unstarted", () => {
    const clock = new TrialClock();
    expect(clock.running()).toBe(false);
    expect(() => clock.at(10)).toThrow(/not started/);
    clock.start(5000);
    expect(clock.at(5000)).toBe(0);
    expect(clock.at(5412.5)).toBe(412.5);
    clock.stop();
    expect(clock.running()).toBe(false);
  });

  it("samples carry the pointer and go invalid off-stage or tab-hidden", () => {
    const gaze = new MouseGaze();
    expect(gaze.sample(0).valid).toBe(false); // no pointer seen yet
    gaze.moved(120, 80);
    expect(gaze.sample(16)).toEqual({ t_ms: 16, x_px: 120, y_px: 80, valid: true });
    gaze.hidden(true);
    expect(gaze.sample(32).valid).toBe(false);
    gaze.hidden(false);
    gaze.left();
    expect(gaze.sample(48).valid).toBe(false);
    gaze.moved(10, 20);
    expect(gaze.sample(64).valid).toBe(true);
  });
});
