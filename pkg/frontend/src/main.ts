// Search console wiring: one websocket to the live engine, one canvas
// stage, a render loop.  The engine decides everything; this file just
// moves input events out and paints messages that come back.

import {
  EngineMessage,
  gazeMessage,
  keyMessage,
  parseEngineMessage,
  ratingMessage,
  trialStartMessage,
} from "./protocol.js";
import { TrialView } from "./session.js";
import { MouseGaze, TrialClock } from "./gaze.js";
import { Graymap, fetchScene, placeholderScene } from "./scene.js";
import {
  bitmapFromRgba,
  drawBlank,
  drawFixationCross,
  drawStretched,
  grayRgba,
  indicatorLabel,
  overlayRgba,
} from "./render.js";
import { reportRows, statsRows } from "./report.js";

const CROSS_MS = 900; // fixation-cross presentation before the stimulus
const DEFAULT_W = 1024;
const DEFAULT_H = 760;

const stage = document.getElementById("stage") as HTMLCanvasElement;
const ctx = stage.getContext("2d")!;
const indicatorText = document.getElementById("indicator-text")!;
const indicatorSquare = document.getElementById("indicator-square")!;
const banner = document.getElementById("banner")!;
const connNote = document.getElementById("conn-note")!;
const ratingBox = document.getElementById("rating-box")!;
const ratingTitle = document.getElementById("rating-title")!;
const ratingButtons = document.getElementById("rating-buttons")!;
const reportTable = document.getElementById("report-table")!;
const statsTable = document.getElementById("stats-table")!;
const startButton = document.getElementById("start") as HTMLButtonElement;

const imageIdInput = document.getElementById("image-id") as HTMLInputElement;
const zoomSelect = document.getElementById("zoom") as HTMLSelectElement;
const clutterSelect = document.getElementById("clutter") as HTMLSelectElement;
const personPresent = document.getElementById("person-present") as HTMLInputElement;
const weaponPresent = document.getElementById("weapon-present") as HTMLInputElement;
const aidVisible = document.getElementById("aid-visible") as HTMLInputElement;

const view = new TrialView();
const clock = new TrialClock();
const gaze = new MouseGaze();

let scene: Graymap = placeholderScene("blank", DEFAULT_W, DEFAULT_H);
let sceneBitmap: HTMLCanvasElement | null = null;
let overlayBitmap: HTMLCanvasElement | null = null;
let overlayFor: Float32Array | null = null;
let crossTimer: number | null = null;

const ws = new WebSocket("ws://" + location.host + "/ws");

ws.onopen = () => {
  connNote.textContent = "connected";
};

ws.onmessage = (event: MessageEvent) => {
  let msg: EngineMessage;
  try {
    msg = parseEngineMessage(String(event.data));
  } catch (err) {
    view.halt(String(err));
    return;
  }
  view.handleMessage(msg, performance.now());
  if (msg.type === "trial_report") {
    clock.stop();
    renderTables();
  }
};

ws.onclose = () => {
  connNote.textContent = "disconnected";
  if (crossTimer !== null) {
    clearTimeout(crossTimer);
    crossTimer = null;
  }
  clock.stop();
  view.disconnected();
};

function setScene(map: Graymap): void {
  scene = map;
  stage.width = map.width;
  stage.height = map.height;
  sceneBitmap = bitmapFromRgba(grayRgba(map.values), map.width, map.height);
}

function sendText(text: string): void {
  if (ws.readyState === WebSocket.OPEN) {
    ws.send(text);
  }
}

startButton.onclick = async () => {
  if (ws.readyState !== WebSocket.OPEN || view.inTrial() || crossTimer !== null) {
    return;
  }
  const imageId = imageIdInput.value.trim() || "scene-01";
  setScene((await fetchScene(imageId)) ?? placeholderScene(imageId, DEFAULT_W, DEFAULT_H));
  view.beginTrial();
  crossTimer = window.setTimeout(() => {
    crossTimer = null;
    sendText(
      trialStartMessage({
        image_id: imageId,
        zoom: zoomSelect.value,
        clutter: clutterSelect.value,
        person_present: personPresent.checked,
        weapon_present: weaponPresent.checked,
        aid_visible: aidVisible.checked,
      }),
    );
    clock.start(performance.now());
    view.trialStarted();
  }, CROSS_MS);
};

// Pointer-as-gaze over the stage; coordinates map into the stimulus
// pixel grid whatever the CSS size.
stage.addEventListener("mousemove", (e: MouseEvent) => {
  const rect = stage.getBoundingClientRect();
  gaze.moved(
    ((e.clientX - rect.left) * stage.width) / rect.width,
    ((e.clientY - rect.top) * stage.height) / rect.height,
  );
});
stage.addEventListener("mouseleave", () => gaze.left());
document.addEventListener("visibilitychange", () => gaze.hidden(document.hidden));

// Spacebar asks the engine for the exploration map; right arrow says
// "done searching".  Both only mean something during search.
document.addEventListener("keydown", (e: KeyboardEvent) => {
  if (!view.inSearch() || !clock.running()) {
    return;
  }
  if (e.code === "Space") {
    e.preventDefault();
    sendText(keyMessage(clock.at(performance.now()), "space"));
  } else if (e.code === "ArrowRight") {
    e.preventDefault();
    sendText(keyMessage(clock.at(performance.now()), "right_arrow"));
  }
});

for (let value = 1; value <= 10; value++) {
  const button = document.createElement("button");
  button.textContent = String(value);
  button.onclick = () => {
    const stage_ = view.submitRating();
    if (stage_ !== null && clock.running()) {
      sendText(ratingMessage(clock.at(performance.now()), stage_, value));
    }
  };
  ratingButtons.appendChild(button);
}

function renderTables(): void {
  const rows = view.report === null ? [] : reportRows(view.report);
  reportTable.innerHTML = rows
    .map(([k, v]) => "<tr><td>" + k + "</td><td>" + v + "</td></tr>")
    .join("");
  statsTable.innerHTML = statsRows(view.stats())
    .map(([k, v]) => "<tr><td>" + k + "</td><td>" + v + "</td></tr>")
    .join("");
}

function frame(): void {
  const now = performance.now();
  view.tick(now);

  if (view.inSearch() && clock.running()) {
    const sample = gaze.sample(clock.at(now));
    sendText(gazeMessage(sample.t_ms, sample.x_px, sample.y_px, sample.valid));
  }

  const label = indicatorLabel(view.indicator);
  indicatorText.textContent = label.text;
  indicatorText.style.color = label.color;
  indicatorSquare.style.background = label.color;
  const aidShown = view.inTrial() && aidVisible.checked;
  indicatorText.style.visibility = aidShown ? "visible" : "hidden";
  indicatorSquare.style.visibility = aidShown ? "visible" : "hidden";

  banner.textContent = view.error ?? "";
  banner.style.display = view.error === null ? "none" : "block";

  const stagePrompt = view.pendingStage();
  ratingBox.style.display =
    view.phase === "person_rating" || view.phase === "weapon_rating" ? "block" : "none";
  ratingTitle.textContent =
    stagePrompt === null
      ? "…"
      : "Was a " + stagePrompt + " present? 1 = sure no … 10 = sure yes";

  if (view.overlayVisible(now)) {
    const overlay = view.overlay!;
    if (overlayFor !== overlay.values) {
      overlayFor = overlay.values;
      overlayBitmap = bitmapFromRgba(overlayRgba(overlay.values), overlay.width, overlay.height);
    }
    drawStretched(ctx, overlayBitmap!);
  } else if (view.phase === "fixation_cross") {
    drawFixationCross(ctx);
  } else if (view.inSearch()) {
    if (sceneBitmap !== null) {
      drawStretched(ctx, sceneBitmap);
    }
  } else if (view.phase === "person_rating" || view.phase === "weapon_rating") {
    drawBlank(ctx, "rate below");
  } else if (view.phase === "feedbackless_advance") {
    drawBlank(ctx, "trial done — Start begins the next one");
  } else {
    drawBlank(ctx, "Start begins a trial");
  }

  requestAnimationFrame(frame);
}

drawBlank(ctx, "connecting…");
requestAnimationFrame(frame);
