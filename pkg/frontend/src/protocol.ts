// Client side of the aaad-live/1 wire protocol.
//
// Client→engine messages reuse the session-log record shapes (a JSON
// object with a "kind" tag); engine→client messages carry a "type"
// tag.  The client only forwards input events and mirrors what comes
// back — every judgement (triggers, prompts, reports) is the engine's.

export const PROTOCOL = "aaad-live/1";

export type KeyCode = "right_arrow" | "space";
export type RatingStage = "person" | "weapon";

export interface TrialStartOptions {
  image_id: string;
  zoom: string;
  clutter: string;
  trial_id?: string;
  aid_visible?: boolean;
  aid_target?: string;
  person_present?: boolean;
  weapon_present?: boolean;
}

export function trialStartMessage(opts: TrialStartOptions): string {
  return JSON.stringify({ kind: "trial_start", t_ms: 0.0, ...opts });
}

export function gazeMessage(tMs: number, xPx: number, yPx: number, valid: boolean): string {
  return JSON.stringify({ kind: "gaze", t_ms: tMs, x_px: xPx, y_px: yPx, valid: valid });
}

export function keyMessage(tMs: number, code: KeyCode): string {
  return JSON.stringify({ kind: "key", t_ms: tMs, code: code });
}

export function ratingMessage(tMs: number, stage: RatingStage, value: number): string {
  return JSON.stringify({ kind: "rating", t_ms: tMs, stage: stage, value: value });
}

export function trialEndMessage(tMs: number, reason: string): string {
  return JSON.stringify({ kind: "trial_end", t_ms: tMs, reason: reason });
}

export interface HelloMessage {
  type: "hello";
  protocol: string;
}

export interface StateMessage {
  type: "state";
  t_ms: number;
  state: "explore" | "move_on";
}

export interface ExplorationMapMessage {
  type: "exploration_map";
  t_ms: number;
  width: number;
  height: number;
  duration_ms: number;
  data_b64: string;
}

export interface PromptMessage {
  type: "prompt";
  t_ms: number;
  stage: RatingStage;
}

export interface TrialReportMessage {
  type: "trial_report";
  t_ms: number;
  report: Record<string, unknown>;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type EngineMessage =
  | HelloMessage
  | StateMessage
  | ExplorationMapMessage
  | PromptMessage
  | TrialReportMessage
  | ErrorMessage;

const REQUIRED_FIELDS: Record<string, string[]> = {
  hello: ["protocol"],
  state: ["t_ms", "state"],
  exploration_map: ["t_ms", "width", "height", "duration_ms", "data_b64"],
  prompt: ["t_ms", "stage"],
  trial_report: ["t_ms", "report"],
  error: ["message"],
};

// Strict on the type tag and its required fields, lenient on extras,
// mirroring the engine's own reader.
export function parseEngineMessage(text: string): EngineMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new Error("malformed engine message: " + String(err));
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new Error("engine message is not a JSON object");
  }
  const msg = raw as Record<string, unknown>;
  const type = msg["type"];
  if (typeof type !== "string" || !(type in REQUIRED_FIELDS)) {
    throw new Error("unknown engine message type: " + JSON.stringify(type));
  }
  for (const field of REQUIRED_FIELDS[type]) {
    if (!(field in msg)) {
      throw new Error(type + " message missing field " + JSON.stringify(field));
    }
  }
  return msg as unknown as EngineMessage;
}

// Exploration maps travel as base64 of row-major big-endian 16-bit
// values; full scale (65535) means highest remaining priority.
export function decodeGraymap(msg: ExplorationMapMessage): Float32Array {
  const binary = atob(msg.data_b64);
  const expected = msg.width * msg.height * 2;
  if (binary.length !== expected) {
    throw new Error(
      "exploration_map payload is " + binary.length + " bytes, expected " + expected,
    );
  }
  const values = new Float32Array(msg.width * msg.height);
  for (let i = 0; i < values.length; i++) {
    const hi = binary.charCodeAt(2 * i);
    const lo = binary.charCodeAt(2 * i + 1);
    values[i] = ((hi << 8) | lo) / 65535;
  }
  return values;
}
