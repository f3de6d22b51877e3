"""Seeded synthetic observers for closed-loop Monte Carlo runs.

An observer is a gaze/stop/rating policy rolled out against a live
engine session (the session is the oracle for exploration maps and
trigger state), producing a complete `aaad-log/1` event list with the
24 fps tick lattice already interleaved.  Generation is a pure function
of (params, trial, bundle): one seed stream drives gaze, a second
drives ratings, so stopping earlier or later does not perturb the
correctness draws of other arms sharing the trial seed.

Kinematics are constructed to be unambiguous for the oculomotor
classifier: constant-velocity flights of at least 22 deg/s whose onset
and offset accelerations clear 4000 deg/s^2 by an order of magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .engine import (
    SessionMetrics,
    TickLattice,
    TrialConfig,
    TrialReport,
    TrialSession,
    aggregate_session,
)
from .logio import GazeSample, KeyInput, Rating, TrialEnd, TrialStart
from .surface import Fixation

SACCADE_POLICIES = ("uniform", "clutter_weighted", "map_greedy")
STOP_POLICIES = ("fixed_time", "trigger_plus_reaction")

# flight pacing: ~100 deg/s cruise, duration clamped so short hops still
# clear the classifier's 22 deg/s gate and long sweeps stay saccade-like
_FLIGHT_MS_PER_DEG = 10.0
_FLIGHT_MIN_MS = 12
_FLIGHT_MAX_MS = 60
_MIN_JUMP_DEG = 0.5

_DWELL_MIN_MS = 80
_DWELL_MAX_MS = 1500


@dataclass(frozen=True)
class SyntheticObserverParams:
    """One observer: seed plus fixation, saccade-target and stop policies."""

    seed: int
    fixation_mu: float = math.log(250.0)  # lognormal location, log-ms
    fixation_sigma: float = 0.35
    saccade_policy: str = "uniform"
    stop_policy: str = "fixed_time"
    # fixed_time: search duration; trigger_plus_reaction: reaction delay
    stop_param_ms: float = 3000.0
    max_duration_ms: float = 30000.0

    def __post_init__(self):
        if not math.isfinite(self.fixation_mu):
            raise ValueError("fixation_mu must be finite")
        if not self.fixation_sigma > 0:
            raise ValueError("fixation_sigma must be positive")
        if self.saccade_policy not in SACCADE_POLICIES:
            raise ValueError(f"unknown saccade_policy {self.saccade_policy!r}")
        if self.stop_policy not in STOP_POLICIES:
            raise ValueError(f"unknown stop_policy {self.stop_policy!r}")
        if not self.stop_param_ms > 0:
            raise ValueError("stop_param_ms must be positive")
        if not self.max_duration_ms > 0:
            raise ValueError("max_duration_ms must be positive")


def _sample_dwell(params: SyntheticObserverParams, rng) -> int:
    d = rng.lognormal(params.fixation_mu, params.fixation_sigma)
    return int(round(min(max(d, _DWELL_MIN_MS), _DWELL_MAX_MS)))


def _pick_target(params, rng, session, clutter_map, pos, dwell_ms):
    geom = session.geometry
    w, h = geom.width_px, geom.height_px
    min_px = _MIN_JUMP_DEG / geom.deg_per_px

    if params.saccade_policy == "map_greedy":
        # plan on the map with the still-open fixation folded in, otherwise
        # the dwell just spent does not repel the next target
        open_fix = Fixation(position_px=pos, duration_ms=float(dwell_ms))
        idx = int(np.argmax(session.exploration_values(open_fix)))
        target = (float(idx % w), float(idx // w))
    elif params.saccade_policy == "clutter_weighted" and clutter_map is not None:
        weights = np.asarray(clutter_map.values, dtype=float).ravel()
        total = weights.sum()
        if total <= 0:
            weights = np.ones_like(weights)
            total = weights.sum()
        idx = int(rng.choice(weights.size, p=weights / total))
        target = (float(idx % w), float(idx // w))
    else:
        # uniform (also clutter_weighted without an image prior)
        for _ in range(64):
            target = (float(rng.uniform(0, w - 1)), float(rng.uniform(0, h - 1)))
            if math.hypot(target[0] - pos[0], target[1] - pos[1]) >= min_px:
                return target

    if math.hypot(target[0] - pos[0], target[1] - pos[1]) < min_px:
        # degenerate pick right under the current fixation: hop sideways so
        # the flight still registers as a saccade
        shift = 2.0 / geom.deg_per_px
        x = target[0] + shift if target[0] + shift <= w - 1 else target[0] - shift
        target = (max(min(x, w - 1.0), 0.0), target[1])
    return target


def synthesize_with_report(params: SyntheticObserverParams, trial: TrialConfig,
                           bundle, clutter_map=None):
    """Roll the policy out against a live session; return (events, report)."""
    ss = np.random.SeedSequence(params.seed)
    gaze_rng, rating_rng = (np.random.default_rng(c) for c in ss.spawn(2))

    session = TrialSession(bundle, trial, clutter_map)
    session.start()
    geom = session.geometry
    lattice = TickLattice()
    events = [TrialStart(
        t_ms=0.0, trial_id=trial.trial_id, image_id=trial.image_id,
        zoom=trial.setting.zoom, clutter=trial.setting.clutter,
        aid_visible=trial.aid_visible, aid_target=trial.setting.target,
        person_present=trial.person_present, weapon_present=trial.weapon_present,
    )]

    def push(ev):
        for tick in lattice.advance(ev.t_ms):
            events.append(tick)
            session.feed(tick)
        events.append(ev)
        session.feed(ev)

    fixed = params.stop_policy == "fixed_time"
    stop_at = params.stop_param_ms if fixed else None
    pos = ((geom.width_px - 1) / 2.0, (geom.height_px - 1) / 2.0)
    t = 0
    dwell = _sample_dwell(params, gaze_rng)
    dwell_left = dwell
    flight = None  # (target, steps_left)

    while True:
        due = min(stop_at if stop_at is not None else math.inf,
                  params.max_duration_ms)
        if due <= t:
            st = max(float(due), float(t - 1))
            push(KeyInput(t_ms=st, code="right_arrow"))
            p = bundle.model_for(trial.setting).time_curve.pc(st)
            for stage, truth in (("person", trial.person_present),
                                 ("weapon", trial.weapon_present)):
                correct = bool(rating_rng.random() < p)
                resp = truth if correct else not truth
                value = int(rating_rng.integers(6, 11)) if resp \
                    else int(rating_rng.integers(1, 6))
                push(Rating(t_ms=st, stage=stage, value=value))
            push(TrialEnd(t_ms=st, reason="advance"))
            return events, session.report

        push(GazeSample(t_ms=float(t), x_px=pos[0], y_px=pos[1], valid=True))
        if stop_at is None and session.trigger.general_ok:
            stop_at = session.trigger.general_trigger_ms + params.stop_param_ms
        t += 1

        if flight is not None:
            target, steps = flight
            if steps <= 1:
                pos = target
                flight = None
                dwell = _sample_dwell(params, gaze_rng)
                dwell_left = dwell
            else:
                pos = (pos[0] + (target[0] - pos[0]) / steps,
                       pos[1] + (target[1] - pos[1]) / steps)
                flight = (target, steps - 1)
        else:
            dwell_left -= 1
            if dwell_left <= 0:
                target = _pick_target(params, gaze_rng, session, clutter_map,
                                      pos, dwell)
                dist_deg = math.hypot(target[0] - pos[0],
                                      target[1] - pos[1]) * geom.deg_per_px
                steps = int(round(min(max(dist_deg * _FLIGHT_MS_PER_DEG,
                                          _FLIGHT_MIN_MS), _FLIGHT_MAX_MS)))
                flight = (target, steps)


def synthesize(params: SyntheticObserverParams, trial: TrialConfig, bundle,
               clutter_map=None) -> list:
    """Generated event log for one trial (ticks included)."""
    return synthesize_with_report(params, trial, bundle, clutter_map)[0]


@dataclass(frozen=True)
class SimulationArm:
    name: str
    metrics: SessionMetrics
    reports: tuple[TrialReport, ...]


def run_simulation(bundle, setting, arms: dict, n_trials: int, seed: int,
                   prevalence: float = 0.5, clutter_map=None) -> dict:
    """Monte Carlo over policy arms with common per-trial random numbers.

    Each trial reuses one seed across arms, so arms differ only through
    their policies; ground truth presence is Bernoulli(prevalence).
    """
    if n_trials < 1:
        raise ValueError("need at least one trial")
    if not arms:
        raise ValueError("need at least one policy arm")
    if not 0.0 <= prevalence <= 1.0:
        raise ValueError("prevalence must be in [0, 1]")
    seed_rng, truth_rng = (np.random.default_rng(c)
                           for c in np.random.SeedSequence(seed).spawn(2))
    trial_seeds = seed_rng.integers(0, 2**63, size=n_trials)
    configs = []
    for i in range(n_trials):
        configs.append(TrialConfig(
            trial_id=f"t{i:05d}", image_id=f"synthetic-{i:05d}", setting=setting,
            person_present=bool(truth_rng.random() < prevalence),
            weapon_present=bool(truth_rng.random() < prevalence),
        ))
    out = {}
    for name, template in arms.items():
        reports = []
        for i, cfg in enumerate(configs):
            params = replace(template, seed=int(trial_seeds[i]))
            _, report = synthesize_with_report(params, cfg, bundle, clutter_map)
            reports.append(report)
        out[name] = SimulationArm(name=name, metrics=aggregate_session(reports),
                                  reports=tuple(reports))
    return out


def mean_time_ratios(arms: dict) -> dict:
    """Pairwise mean-trial-time ratios, keyed 'a/b' (a's time over b's)."""
    ratios = {}
    for a in arms:
        for b in arms:
            if a != b:
                ratios[f"{a}/{b}"] = (arms[a].metrics.mean_trial_time_s
                                      / arms[b].metrics.mean_trial_time_s)
    return ratios
