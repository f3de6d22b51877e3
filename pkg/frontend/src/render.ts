// Canvas painting for the search console.  The pixel conversions are
// pure functions; the draw calls are thin wrappers over 2d contexts.

import { Indicator } from "./session.js";

// Grayscale RGBA for the scene bitmap.
export function grayRgba(values: Float32Array): Uint8ClampedArray {
  const rgba = new Uint8ClampedArray(values.length * 4);
  for (let i = 0; i < values.length; i++) {
    const v = Math.round(values[i] * 255);
    rgba[4 * i] = v;
    rgba[4 * i + 1] = v;
    rgba[4 * i + 2] = v;
    rgba[4 * i + 3] = 255;
  }
  return rgba;
}

// Amber heat for the exploration-map flash: bright where the engine
// still wants fixations, dark where coverage is spent.
export function overlayRgba(values: Float32Array): Uint8ClampedArray {
  const rgba = new Uint8ClampedArray(values.length * 4);
  for (let i = 0; i < values.length; i++) {
    const v = values[i];
    rgba[4 * i] = Math.round(40 + 215 * v);
    rgba[4 * i + 1] = Math.round(20 + 145 * v);
    rgba[4 * i + 2] = 25;
    rgba[4 * i + 3] = 255;
  }
  return rgba;
}

// Indicator text and color are one fact: red means keep exploring,
// green means the engine recommends moving on.
export function indicatorLabel(indicator: Indicator): { text: string; color: string } {
  return indicator === "move_on_green"
    ? { text: "Move On", color: "#27ae60" }
    : { text: "Explore", color: "#c0392b" };
}

export function bitmapFromRgba(rgba: Uint8ClampedArray, width: number, height: number): HTMLCanvasElement {
  const canvas = document.createElement("canvas");
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext("2d")!;
  const image = ctx.createImageData(width, height);
  image.data.set(rgba);
  ctx.putImageData(image, 0, 0);
  return canvas;
}

export function drawStretched(ctx: CanvasRenderingContext2D, bitmap: HTMLCanvasElement): void {
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(bitmap, 0, 0, ctx.canvas.width, ctx.canvas.height);
}

export function drawFixationCross(ctx: CanvasRenderingContext2D): void {
  const w = ctx.canvas.width;
  const h = ctx.canvas.height;
  ctx.fillStyle = "#202020";
  ctx.fillRect(0, 0, w, h);
  ctx.strokeStyle = "#f0f0f0";
  ctx.lineWidth = 3;
  const arm = 18;
  ctx.beginPath();
  ctx.moveTo(w / 2 - arm, h / 2);
  ctx.lineTo(w / 2 + arm, h / 2);
  ctx.moveTo(w / 2, h / 2 - arm);
  ctx.lineTo(w / 2, h / 2 + arm);
  ctx.stroke();
}

export function drawBlank(ctx: CanvasRenderingContext2D, note: string): void {
  const w = ctx.canvas.width;
  const h = ctx.canvas.height;
  ctx.fillStyle = "#202020";
  ctx.fillRect(0, 0, w, h);
  ctx.fillStyle = "#808080";
  ctx.font = "16px sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(note, w / 2, h / 2);
}
