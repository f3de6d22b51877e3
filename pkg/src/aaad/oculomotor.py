"""Streaming saccade/fixation classification from raw gaze samples.

A saccade opens when smoothed velocity exceeds 22 deg/s and acceleration
exceeds 4000 deg/s^2 at the same sample, and closes when both fall back
below.  Velocity comes from central differences over a 5-sample window,
which at the nominal 1000 Hz keeps single-sample tracker noise out of
the derivative.  Each saccade onset also emits fixation_end for the
fixation it interrupts, carrying the fixation's centroid and dwell time.
Track-loss gaps are bridged up to 50 ms; past that the fixation stays
open but its clock pauses.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .surface import Fixation, GridGeometry

VELOCITY_THRESHOLD_DEG_S = 22.0
ACCEL_THRESHOLD_DEG_S2 = 4000.0
KINEMATIC_WINDOW = 5
GAP_BRIDGE_MS = 50.0


@dataclass(frozen=True)
class GazeSample:
    """One tracker sample; valid=False marks blinks/track loss."""

    t_ms: float
    x_px: float
    y_px: float
    valid: bool = True


@dataclass(frozen=True)
class OculomotorEvent:
    kind: str  # fixation_end | saccade_onset | saccade_offset
    t_ms: float
    fixation: Fixation | None = None


class StreamingClassifier:
    """Feed GazeSamples one at a time; collect oculomotor events as they fire.

    Events fire at the center of the smoothing window, so they lag the
    raw stream by two samples; fixation buffers are trimmed back to the
    event time so in-flight samples never contaminate a centroid.
    """

    def __init__(self, geometry: GridGeometry):
        self.geometry = geometry
        self._window = deque(maxlen=KINEMATIC_WINDOW)  # (t_ms, x_deg, y_deg)
        self._prev_vel = None  # (t_center_ms, speed_deg_s)
        self._in_saccade = False
        self._last_t = -math.inf
        self._last_valid_t = None
        self._fix_open = False
        self._fix_samples: list[tuple[float, float, float]] = []  # (t_ms, x_px, y_px)

    @property
    def in_saccade(self) -> bool:
        return self._in_saccade

    def _close_fixation(self, t_ms: float) -> Fixation | None:
        if not self._fix_open:
            return None
        self._fix_open = False
        kept = [s for s in self._fix_samples if s[0] <= t_ms]
        self._fix_samples = []
        if not kept:
            return None
        cx = sum(s[1] for s in kept) / len(kept)
        cy = sum(s[2] for s in kept) / len(kept)
        active = 0.0
        for prev, cur in zip(kept, kept[1:]):
            delta = cur[0] - prev[0]
            if delta <= GAP_BRIDGE_MS:
                active += delta
        return Fixation(position_px=(cx, cy), duration_ms=max(active, 1.0))

    def feed(self, sample: GazeSample) -> list[OculomotorEvent]:
        if sample.t_ms <= self._last_t:
            raise ValueError(
                f"gaze timestamps must strictly increase ({sample.t_ms} after {self._last_t})"
            )
        self._last_t = sample.t_ms
        if not sample.valid:
            return []
        t = sample.t_ms
        gap = None if self._last_valid_t is None else t - self._last_valid_t
        self._last_valid_t = t
        if gap is not None and gap > GAP_BRIDGE_MS:
            # long track loss: forget kinematics so the reappearance jump
            # does not read as a saccade; the fixation clock pause falls
            # out of the per-pair delta rule in _close_fixation
            self._window.clear()
            self._prev_vel = None
        if not self._fix_open and not self._in_saccade:
            self._fix_open = True
        if self._fix_open:
            self._fix_samples.append((t, sample.x_px, sample.y_px))
        dpp = self.geometry.deg_per_px
        self._window.append((t, sample.x_px * dpp, sample.y_px * dpp))
        events: list[OculomotorEvent] = []
        if len(self._window) == KINEMATIC_WINDOW:
            t0, x0, y0 = self._window[0]
            t4, x4, y4 = self._window[-1]
            tc = self._window[KINEMATIC_WINDOW // 2][0]
            dt_s = (t4 - t0) / 1000.0
            speed = math.hypot(x4 - x0, y4 - y0) / dt_s
            accel = None
            if self._prev_vel is not None:
                tp, vp = self._prev_vel
                if tc > tp:
                    accel = (speed - vp) / ((tc - tp) / 1000.0)
            self._prev_vel = (tc, speed)
            if accel is not None:
                if (not self._in_saccade
                        and speed > VELOCITY_THRESHOLD_DEG_S
                        and accel > ACCEL_THRESHOLD_DEG_S2):
                    fix = self._close_fixation(tc)
                    if fix is not None:
                        events.append(OculomotorEvent("fixation_end", tc, fix))
                    events.append(OculomotorEvent("saccade_onset", tc))
                    self._in_saccade = True
                elif (self._in_saccade
                        and speed <= VELOCITY_THRESHOLD_DEG_S
                        and accel <= ACCEL_THRESHOLD_DEG_S2):
                    events.append(OculomotorEvent("saccade_offset", tc))
                    self._in_saccade = False
                    self._fix_open = True
        return events

    def flush(self, t_ms: float | None = None) -> list[OculomotorEvent]:
        """Close the open fixation at stream end (trial end, track shutdown)."""
        t = t_ms if t_ms is not None else self._last_valid_t
        if t is None:
            return []
        fix = self._close_fixation(t)
        if fix is None:
            return []
        return [OculomotorEvent("fixation_end", t, fix)]


def classify_oculomotor(stream, geometry: GridGeometry) -> list[OculomotorEvent]:
    """Run the streaming classifier over a whole sample sequence."""
    clf = StreamingClassifier(geometry)
    events: list[OculomotorEvent] = []
    for sample in stream:
        events.extend(clf.feed(sample))
    events.extend(clf.flush())
    return events
