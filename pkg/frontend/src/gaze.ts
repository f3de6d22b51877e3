// Mouse-as-gaze: the pointer stands in for an eye tracker so the whole
// loop runs without hardware.  One sample per display frame, stamped
// on the trial clock; samples go invalid while the tab is hidden or
// the pointer is off the stimulus.  An external gaze feed can replace
// this by calling the same sample shape into the sender.

export interface GazeRecord {
  t_ms: number;
  x_px: number;
  y_px: number;
  valid: boolean;
}

// Trial-relative milliseconds from a monotonic wall clock
// (performance.now() in the browser).
export class TrialClock {
  private epochMs: number | null = null;

  start(nowMs: number): void {
    this.epochMs = nowMs;
  }

  stop(): void {
    this.epochMs = null;
  }

  running(): boolean {
    return this.epochMs !== null;
  }

  at(nowMs: number): number {
    if (this.epochMs === null) {
      throw new Error("trial clock not started");
    }
    return nowMs - this.epochMs;
  }
}

export class MouseGaze {
  private x = 0;
  private y = 0;
  private onStage = false;
  private tabHidden = false;

  moved(xPx: number, yPx: number): void {
    this.x = xPx;
    this.y = yPx;
    this.onStage = true;
  }

  left(): void {
    this.onStage = false;
  }

  hidden(isHidden: boolean): void {
    this.tabHidden = isHidden;
  }

  sample(tMs: number): GazeRecord {
    return {
      t_ms: tMs,
      x_px: this.x,
      y_px: this.y,
      valid: this.onStage && !this.tabHidden,
    };
  }
}
