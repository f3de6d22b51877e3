// Table rows for the per-trial report and the running session stats.
//
// The per-trial rows deliberately omit presence truth and response
// correctness: ratings get no feedback, matching the trial procedure.
// Everything shown is lifted straight from engine report fields.

import { SessionStats } from "./session.js";

export function fmtMs(v: unknown): string {
  return typeof v === "number" ? v.toFixed(0) + " ms" : "—";
}

export function fmtNum(v: unknown, digits: number): string {
  return typeof v === "number" ? v.toFixed(digits) : "—";
}

export function fmtRate(v: number | null): string {
  return v === null ? "—" : (100 * v).toFixed(0) + "%";
}

export function reportRows(report: Record<string, unknown>): [string, string][] {
  return [
    ["trial", String(report["trial_id"])],
    ["search time", fmtMs(report["duration_ms"])],
    ["eye movements", fmtNum(report["n_eyemovements"], 0)],
    ["final d score", fmtNum(report["final_d_score"], 3)],
    ["map requests", fmtNum(report["n_map_requests"], 0)],
    ["ended by", String(report["user_action"] ?? "—")],
    ["time channel trigger", fmtMs(report["time_trigger_ms"])],
    ["eye-movement channel trigger", fmtMs(report["eyemvmt_trigger_ms"])],
    ["detectability channel trigger", fmtMs(report["detect_trigger_ms"])],
    ["move-on recommendation", fmtMs(report["general_trigger_ms"])],
  ];
}

export function statsRows(stats: SessionStats): [string, string][] {
  return [
    ["trials", String(stats.n_trials)],
    ["complete", String(stats.n_complete)],
    ["mean search time", stats.mean_trial_time_s === null ? "—" : stats.mean_trial_time_s.toFixed(2) + " s"],
    ["person hit rate", fmtRate(stats.person_hit_rate)],
    ["person false-alarm rate", fmtRate(stats.person_fa_rate)],
    ["weapon hit rate", fmtRate(stats.weapon_hit_rate)],
    ["weapon false-alarm rate", fmtRate(stats.weapon_fa_rate)],
    ["mean stop lag after recommendation", fmtMs(stats.mean_general_offset_ms)],
  ];
}
