"""Probabilistic search-satisfaction gate.

A channel is satisfied when the chance that its PC curve still has more
than epsilon of headroom left drops low enough: equivalently, when
Pr[PC_max - PC(x) < epsilon] exceeds eta under a Gaussian error model
with the curve's pointwise sigma.  Each of the three channels (time,
eye movements, detectability) gets a precomputed metric threshold; at
run time the trigger just compares metrics to thresholds and latches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .sdt import normal_cdf, probit

DEFAULT_EPSILON = 0.02
DEFAULT_ETA = 0.025
DEFAULT_SIGMA_FLOOR = 0.005

THRESHOLD_GRID_POINTS = 1024
THRESHOLD_REL_TOL = 1e-3


@dataclass(frozen=True)
class SatisfactionConfig:
    """Tolerance (epsilon), probability bar (eta), and the sigma floor, all in PC units."""

    epsilon: float = DEFAULT_EPSILON
    eta: float = DEFAULT_ETA
    sigma_floor: float = DEFAULT_SIGMA_FLOOR

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        if not self.sigma_floor > 0:
            raise ValueError("sigma_floor must be positive")


@dataclass(frozen=True)
class ChannelThresholds:
    """Metric values at which each channel's satisfaction condition first holds."""

    t_star_ms: float
    e_star: float
    d_star: float

    def __post_init__(self):
        for name in ("t_star_ms", "e_star", "d_star"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative")


@dataclass(frozen=True)
class TriggerState:
    """Latching per-channel satisfaction flags plus first-crossing timestamps."""

    time_ok: bool = False
    eyemvmt_ok: bool = False
    detect_ok: bool = False
    time_trigger_ms: float | None = None
    eyemvmt_trigger_ms: float | None = None
    detect_trigger_ms: float | None = None
    general_trigger_ms: float | None = None
    last_now_ms: float = -math.inf

    @property
    def general_ok(self) -> bool:
        return self.time_ok and self.eyemvmt_ok and self.detect_ok


def satisfaction_probability(pc_max: float, pc: float, sigma: float, epsilon: float) -> float:
    """Probability that the remaining PC headroom is already inside epsilon."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return 1.0 - normal_cdf((pc_max - pc - epsilon) / sigma)


def channel_threshold(curve, cfg: SatisfactionConfig) -> float:
    """Smallest metric value whose satisfaction probability exceeds eta.

    Coarse scan of 1024 points over the curve's fitted domain, refined
    by bisection to 1e-3 relative.  The curve must expose pc(x),
    sigma(x), pc_max and search_domain().
    """
    # PC(x) > pc_max - epsilon - sigma(x) * probit(1 - eta) is the
    # closed form of satisfaction_probability(...) > eta and avoids
    # evaluating the CDF tail at every grid point
    zq = probit(1.0 - cfg.eta)

    def met(x: float) -> bool:
        return float(curve.pc(x)) > curve.pc_max - cfg.epsilon - curve.sigma(x) * zq

    if met(0.0):
        return 0.0
    hi = curve.search_domain()
    step = hi / (THRESHOLD_GRID_POINTS - 1)
    lo_x, hi_x = None, None
    for i in range(1, THRESHOLD_GRID_POINTS):
        x = i * step
        if met(x):
            lo_x, hi_x = (i - 1) * step, x
            break
    if lo_x is None:
        raise ValueError("satisfaction threshold unattainable on this curve")
    while hi_x - lo_x > THRESHOLD_REL_TOL * max(hi_x, 1e-12):
        mid = 0.5 * (lo_x + hi_x)
        if met(mid):
            hi_x = mid
        else:
            lo_x = mid
    return hi_x


def thresholds_for(time_curve, eyemvmt_curve, detect_curve,
                   cfg: SatisfactionConfig | None = None) -> ChannelThresholds:
    """Precompute the three channel thresholds from their fitted curves."""
    cfg = cfg or SatisfactionConfig()
    return ChannelThresholds(
        t_star_ms=channel_threshold(time_curve, cfg),
        e_star=channel_threshold(eyemvmt_curve, cfg),
        d_star=channel_threshold(detect_curve, cfg),
    )


def update_trigger(
    state: TriggerState,
    now_ms: float,
    time_ms: float,
    eyemvmts: float,
    d_score: float,
    thr: ChannelThresholds,
) -> TriggerState:
    """Advance the latching trigger; flags never clear within a trial.

    now_ms stamps newly satisfied channels; time_ms is the time-channel
    metric, kept separate so callers can freeze it between display
    frames or subtract paused intervals without distorting timestamps.
    """
    if now_ms < state.last_now_ms:
        raise ValueError(f"trial clock went backwards: {now_ms} < {state.last_now_ms}")
    time_ok = state.time_ok or time_ms >= thr.t_star_ms
    eyemvmt_ok = state.eyemvmt_ok or eyemvmts >= thr.e_star
    detect_ok = state.detect_ok or d_score >= thr.d_star
    new = replace(
        state,
        time_ok=time_ok,
        eyemvmt_ok=eyemvmt_ok,
        detect_ok=detect_ok,
        time_trigger_ms=state.time_trigger_ms if state.time_ok else (now_ms if time_ok else None),
        eyemvmt_trigger_ms=state.eyemvmt_trigger_ms if state.eyemvmt_ok
        else (now_ms if eyemvmt_ok else None),
        detect_trigger_ms=state.detect_trigger_ms if state.detect_ok
        else (now_ms if detect_ok else None),
        last_now_ms=now_ms,
    )
    if new.general_ok and state.general_trigger_ms is None:
        stamp = max(new.time_trigger_ms, new.eyemvmt_trigger_ms, new.detect_trigger_ms)
        new = replace(new, general_trigger_ms=stamp)
    return new
