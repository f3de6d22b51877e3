"""Real-time trial state machine driving the three-channel Move On aid.

One TrialSession consumes an interleaved stream of gaze samples, display
ticks, key presses and ratings, and produces a TrialReport.  The time
channel is re-evaluated on every 24 fps tick, the eye-movement count on
saccade events, and the detectability score after each fixation ends
(one surface added to the running composite).  All reductions run in a
fixed order, so replaying the same event log reproduces the report
bit for bit.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, replace

import numpy as np

from .bundle import ModelBundle
from .logio import KeyInput, Rating, Tick, TrialEnd, TrialStart
from .oculomotor import GazeSample, OculomotorEvent, StreamingClassifier
from .ppc import Setting
from .satisfaction import TriggerState, update_trigger
from .surface import ClutterMap, Fixation, SurfaceGrid, exploration_map, single_fixation_surface

TICK_HZ = 24.0
TICK_PERIOD_MS = 1000.0 / TICK_HZ
INTERLUDE_MS = 120.0

RATING_PRESENT_MIN = 6  # 1-5 reads as "absent", 6-10 as "present"


@dataclass(frozen=True)
class TrialConfig:
    trial_id: str
    image_id: str
    setting: Setting
    aid_visible: bool = True
    person_present: bool = False
    weapon_present: bool = False

    @classmethod
    def from_trial_start(cls, ev: TrialStart) -> "TrialConfig":
        return cls(
            trial_id=ev.trial_id,
            image_id=ev.image_id,
            setting=Setting(zoom=ev.zoom, clutter=ev.clutter, target=ev.aid_target),
            aid_visible=ev.aid_visible,
            person_present=ev.person_present,
            weapon_present=ev.weapon_present,
        )


@dataclass(frozen=True)
class TrialReport:
    """Everything the analysis needs from one trial."""

    trial_id: str
    duration_ms: float
    n_eyemovements: int
    final_d_score: float
    time_trigger_ms: float | None
    eyemvmt_trigger_ms: float | None
    detect_trigger_ms: float | None
    general_trigger_ms: float | None
    user_action: str | None  # forced_advance | satisfied_advance; None if truncated
    n_map_requests: int
    person_rating: int | None
    weapon_rating: int | None
    complete: bool
    aid_visible: bool
    person_present: bool
    weapon_present: bool

    @property
    def person_response_present(self) -> bool | None:
        if self.person_rating is None:
            return None
        return self.person_rating >= RATING_PRESENT_MIN

    @property
    def weapon_response_present(self) -> bool | None:
        if self.weapon_rating is None:
            return None
        return self.weapon_rating >= RATING_PRESENT_MIN

    def trigger_offset_ms(self, channel: str = "general") -> float | None:
        """duration - trigger time; None when that channel never fired."""
        stamp = {
            "time": self.time_trigger_ms,
            "eyemvmt": self.eyemvmt_trigger_ms,
            "detect": self.detect_trigger_ms,
            "general": self.general_trigger_ms,
        }[channel]
        if stamp is None:
            return None
        return self.duration_ms - stamp


def report_to_dict(report: TrialReport) -> dict:
    d = {
        "trial_id": report.trial_id,
        "duration_ms": report.duration_ms,
        "n_eyemovements": report.n_eyemovements,
        "final_d_score": report.final_d_score,
        "time_trigger_ms": report.time_trigger_ms,
        "eyemvmt_trigger_ms": report.eyemvmt_trigger_ms,
        "detect_trigger_ms": report.detect_trigger_ms,
        "general_trigger_ms": report.general_trigger_ms,
        "user_action": report.user_action,
        "n_map_requests": report.n_map_requests,
        "person_rating": report.person_rating,
        "weapon_rating": report.weapon_rating,
        "person_response_present": report.person_response_present,
        "weapon_response_present": report.weapon_response_present,
        "complete": report.complete,
        "aid_visible": report.aid_visible,
        "person_present": report.person_present,
        "weapon_present": report.weapon_present,
    }
    for channel in ("time", "eyemvmt", "detect", "general"):
        d[f"{channel}_offset_ms"] = report.trigger_offset_ms(channel)
    return d


@dataclass(frozen=True)
class TraceEntry:
    """One trigger re-evaluation, for cadence checks and debugging."""

    t_ms: float
    kind: str  # tick | saccade_onset | saccade_offset | fixation_end | flush
    time_metric_ms: float
    n_eyemovements: int
    d_score: float
    general_ok: bool


@dataclass(frozen=True)
class SessionMetrics:
    n_trials: int
    mean_trial_time_s: float
    person_hit_rate: float
    person_miss_rate: float
    person_fa_rate: float
    person_cr_rate: float
    weapon_hit_rate: float
    weapon_miss_rate: float
    weapon_fa_rate: float
    weapon_cr_rate: float
    mean_time_offset_ms: float | None
    mean_eyemvmt_offset_ms: float | None
    mean_detect_offset_ms: float | None
    mean_general_offset_ms: float | None


class TickLattice:
    """Emits the 24 fps tick events a live stream is missing.

    Capture services call advance(t) with each incoming event time and
    feed the returned ticks first, so captured logs and replayed logs
    see the identical lattice.
    """

    def __init__(self, rate_hz: float = TICK_HZ):
        if not rate_hz > 0:
            raise ValueError("tick rate must be positive")
        self.period_ms = 1000.0 / rate_hz
        self._next = 0

    def advance(self, t_ms: float) -> list[Tick]:
        out = []
        while self._next * self.period_ms <= t_ms:
            out.append(Tick(t_ms=self._next * self.period_ms))
            self._next += 1
        return out


class TrialSession:
    """Event loop for a single trial; one instance per trial, no sharing.

    feed() returns the surfaced outputs for that event as plain dicts
    (state/exploration_map/prompt/trial_report), empty when nothing is
    user-visible.  In shadow mode (aid_visible False) the trigger is
    computed identically but state and map outputs are suppressed and
    the spacebar does nothing.
    """

    def __init__(self, bundle: ModelBundle, cfg: TrialConfig,
                 clutter_map: ClutterMap | None = None, collect_trace: bool = False):
        self.bundle = bundle
        self.cfg = cfg
        self.model = bundle.model_for(cfg.setting)  # also validates the setting
        self.thresholds = self.model.thresholds
        self.geometry = bundle.geometry
        if clutter_map is not None and clutter_map.geometry != bundle.geometry:
            raise ValueError("clutter map geometry does not match the bundle grid")
        self._clutter = clutter_map
        self._classifier = StreamingClassifier(bundle.geometry)
        self._surface_sum = np.zeros((self.geometry.height_px, self.geometry.width_px))
        self._n_eye = 0
        self._d = 0.0
        self._trigger = TriggerState()
        self._phase = "searching"  # -> rating_person -> rating_weapon -> done
        self._now = 0.0
        self._last_tick_ms = 0.0
        self._paused_done = 0.0
        self._interlude_until: float | None = None
        self._n_map = 0
        self._duration: float | None = None
        self._user_action: str | None = None
        self._person_rating: int | None = None
        self._weapon_rating: int | None = None
        self.report: TrialReport | None = None
        self.trace: list[TraceEntry] | None = [] if collect_trace else None

    # -- public surface ----------------------------------------------------

    def start(self) -> list[dict]:
        if self.cfg.aid_visible:
            return [{"type": "state", "t_ms": 0.0, "state": "explore"}]
        return []

    @property
    def phase(self) -> str:
        return self._phase

    @property
    def trigger(self) -> TriggerState:
        return self._trigger

    def feed(self, event) -> list[dict]:
        if self._phase == "done":
            if isinstance(event, TrialEnd):
                return []
            raise ValueError(f"event after trial end: {event!r}")
        t = float(event.t_ms)
        self._now = max(self._now, t)
        self._expire_interlude(t)
        if isinstance(event, GazeSample):
            return self._on_gaze(event)
        if isinstance(event, Tick):
            return self._on_tick(t)
        if isinstance(event, KeyInput):
            return self._on_key(event)
        if isinstance(event, Rating):
            return self._on_rating(event)
        if isinstance(event, TrialEnd):
            return self._finalize()
        if isinstance(event, TrialStart):
            raise ValueError("trial already started")
        raise TypeError(f"unknown event type {type(event).__name__}")

    def finish(self) -> TrialReport:
        """Finalize a session whose log ended early; idempotent."""
        if self.report is None:
            self._finalize()
        return self.report

    # -- event handlers ----------------------------------------------------

    def _on_gaze(self, sample: GazeSample) -> list[dict]:
        if self._phase != "searching":
            return []
        out = []
        for oev in self._classifier.feed(sample):
            out.extend(self._on_oculomotor(oev))
        return out

    def _on_tick(self, t: float) -> list[dict]:
        if self._phase != "searching":
            return []
        self._last_tick_ms = t
        return self._update("tick", t)

    def _on_key(self, event: KeyInput) -> list[dict]:
        if self._phase != "searching":
            return []  # menu phases ignore navigation keys
        t = float(event.t_ms)
        if event.code == "right_arrow":
            return self._end_search(t)
        # space: accept the recommendation, or ask for the exploration map
        if not self.cfg.aid_visible:
            return []
        if self._trigger.general_ok:
            return self._end_search(t)
        if self._interlude_until is not None:
            return []  # already showing the map; repeat press ignored
        self._interlude_until = t + INTERLUDE_MS
        self._n_map += 1
        return [self._map_output(t)]

    def _on_rating(self, event: Rating) -> list[dict]:
        expected = {"rating_person": "person", "rating_weapon": "weapon"}.get(self._phase)
        if expected is None or event.stage != expected:
            raise ValueError(
                f"unexpected rating for stage {event.stage!r} during {self._phase}"
            )
        if event.stage == "person":
            self._person_rating = event.value
            self._phase = "rating_weapon"
            return [{"type": "prompt", "t_ms": float(event.t_ms), "stage": "weapon"}]
        self._weapon_rating = event.value
        return self._finalize()

    def _on_oculomotor(self, oev: OculomotorEvent) -> list[dict]:
        # classifier stamps lag the stream by two samples, so clamp them
        # to the trigger clock instead of letting monotonicity trip
        now = max(oev.t_ms, self._trigger.last_now_ms)
        if oev.kind == "fixation_end":
            self._add_fixation(oev.fixation)
            return self._update("fixation_end", now)
        if oev.kind == "saccade_onset":
            self._n_eye += 1
        return self._update(oev.kind, now)

    # -- internals ----------------------------------------------------------

    def _add_fixation(self, fix: Fixation) -> None:
        # off-screen centroids (gaze past the bezel) clamp onto the grid
        x = min(max(fix.position_px[0], 0.0), self.geometry.width_px - 1.0)
        y = min(max(fix.position_px[1], 0.0), self.geometry.height_px - 1.0)
        surf = single_fixation_surface(
            Fixation(position_px=(x, y), duration_ms=fix.duration_ms),
            self.bundle.family, self.cfg.setting, self.geometry,
        )
        self._surface_sum += surf.values
        self._d = float(np.mean(self._surface_sum))

    def _expire_interlude(self, t: float) -> None:
        if self._interlude_until is not None and t >= self._interlude_until:
            self._paused_done += INTERLUDE_MS
            self._interlude_until = None

    def _search_time(self, t: float) -> float:
        """Trial clock minus accumulated map-interlude pauses."""
        paused = self._paused_done
        if self._interlude_until is not None:
            start = self._interlude_until - INTERLUDE_MS
            if t > start:
                paused += min(t, self._interlude_until) - start
        return t - paused

    def _update(self, kind: str, now: float) -> list[dict]:
        time_metric = self._search_time(self._last_tick_ms)
        prev = self._trigger
        self._trigger = update_trigger(
            prev, now, time_metric, self._n_eye, self._d, self.thresholds
        )
        if self.trace is not None:
            self.trace.append(TraceEntry(now, kind, time_metric, self._n_eye, self._d,
                                         self._trigger.general_ok))
        if (self._trigger.general_ok and not prev.general_ok
                and self.cfg.aid_visible and self._phase == "searching"):
            return [{"type": "state", "t_ms": self._trigger.general_trigger_ms,
                     "state": "move_on"}]
        return []

    def _end_search(self, t: float) -> list[dict]:
        # the action is judged by what the aid showed at the press
        self._user_action = (
            "satisfied_advance" if self._trigger.general_ok else "forced_advance"
        )
        self._duration = t
        self._close_search(t)
        self._phase = "rating_person"
        return [{"type": "prompt", "t_ms": t, "stage": "person"}]

    def _close_search(self, t: float) -> None:
        # fold the terminal dwell into the composite so final_d_score and
        # late trigger stamps reflect everything the observer saw
        for oev in self._classifier.flush(t):
            if oev.kind == "fixation_end":
                self._add_fixation(oev.fixation)
                self._update("flush", max(t, self._trigger.last_now_ms))

    def _finalize(self) -> list[dict]:
        if self._phase == "searching":
            # truncated stream: no advance key ever arrived
            self._duration = self._now
            self._close_search(self._now)
        self._phase = "done"
        report = TrialReport(
            trial_id=self.cfg.trial_id,
            duration_ms=float(self._duration),
            n_eyemovements=self._n_eye,
            final_d_score=self._d,
            time_trigger_ms=self._trigger.time_trigger_ms,
            eyemvmt_trigger_ms=self._trigger.eyemvmt_trigger_ms,
            detect_trigger_ms=self._trigger.detect_trigger_ms,
            general_trigger_ms=self._trigger.general_trigger_ms,
            user_action=self._user_action,
            n_map_requests=self._n_map,
            person_rating=self._person_rating,
            weapon_rating=self._weapon_rating,
            complete=(self._user_action is not None
                      and self._person_rating is not None
                      and self._weapon_rating is not None),
            aid_visible=self.cfg.aid_visible,
            person_present=self.cfg.person_present,
            weapon_present=self.cfg.weapon_present,
        )
        self.report = report
        return [{"type": "trial_report", "t_ms": self._now,
                 "report": report_to_dict(report)}]

    def exploration_values(self, provisional: Fixation | None = None) -> np.ndarray:
        """Current exploration priority map, row-major in [0, 1].

        The displayed map reflects committed fixations only (they commit
        at the next saccade onset).  Planning callers can fold in the
        still-open fixation via `provisional`.
        """
        s = self._surface_sum
        if provisional is not None:
            s = s + single_fixation_surface(provisional, self.bundle.family,
                                            self.cfg.setting, self.geometry).values
        composite = SurfaceGrid(self.geometry, s.copy())
        fc = self._clutter
        if fc is None:
            # no image asset loaded: gate a uniform prior (pure coverage)
            fc = ClutterMap(self.geometry, np.ones_like(self._surface_sum))
        return exploration_map(fc, composite).values

    def _map_output(self, t: float) -> dict:
        data = np.round(self.exploration_values() * 65535.0).astype(">u2")
        return {
            "type": "exploration_map",
            "t_ms": t,
            "width": self.geometry.width_px,
            "height": self.geometry.height_px,
            "duration_ms": INTERLUDE_MS,
            "data_b64": base64.b64encode(data.tobytes()).decode("ascii"),
        }


def with_ticks(events, rate_hz: float = TICK_HZ):
    """Interleave display ticks into a tickless stream (ticks sort first on ties).

    Capture services and synthetic observers both route their streams
    through this, so live sessions and their logs see the same lattice.
    """
    lattice = TickLattice(rate_hz)
    for ev in events:
        if isinstance(ev, TrialStart):
            lattice = TickLattice(rate_hz)  # per-trial clock
            yield ev
            yield from lattice.advance(ev.t_ms)
            continue
        yield from lattice.advance(ev.t_ms)
        yield ev


def run_trial(bundle: ModelBundle, cfg: TrialConfig, events,
              clutter_map: ClutterMap | None = None) -> TrialReport:
    """Drive one trial to a report; truncated streams yield complete=False."""
    session = TrialSession(bundle, cfg, clutter_map=clutter_map)
    session.start()
    for event in events:
        session.feed(event)
    return session.finish()


def shadow_mode(bundle: ModelBundle, cfg: TrialConfig, events) -> TrialReport:
    """run_trial with the aid hidden: identical computation, nothing surfaced."""
    return run_trial(bundle, replace(cfg, aid_visible=False), events)


def run_log(bundle: ModelBundle, events,
            clutter_maps: dict | None = None) -> list[TrialReport]:
    """Replay a (possibly multi-trial) event log into per-trial reports.

    Timestamps are trial-relative; each trial_start record opens a fresh
    session.  clutter_maps optionally maps image_id to a ClutterMap.
    """
    reports: list[TrialReport] = []
    session: TrialSession | None = None
    for event in events:
        if isinstance(event, TrialStart):
            if session is not None:
                reports.append(session.finish())
            cfg = TrialConfig.from_trial_start(event)
            cmap = (clutter_maps or {}).get(cfg.image_id)
            session = TrialSession(bundle, cfg, clutter_map=cmap)
            session.start()
            continue
        if session is None:
            raise ValueError(f"event before any trial_start: {event!r}")
        session.feed(event)
    if session is not None:
        reports.append(session.finish())
    return reports


def _mean_or_none(values: list) -> float | None:
    return sum(values) / len(values) if values else None


def aggregate_session(reports, ground_truths: dict | None = None) -> SessionMetrics:
    """Session-level accuracy and timing metrics over a list of reports.

    ground_truths optionally overrides the presence flags embedded in
    the reports, as {trial_id: (person_present, weapon_present)}.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to aggregate")

    def truth(r: TrialReport) -> tuple:
        if ground_truths is not None:
            try:
                return ground_truths[r.trial_id]
            except KeyError:
                raise ValueError(f"no ground truth for trial {r.trial_id!r}") from None
        return (r.person_present, r.weapon_present)

    rated = [r for r in reports if r.complete]
    if not rated:
        raise ValueError("no complete trials to aggregate")

    rates = {}
    for channel, response in (
        ("person", lambda r: r.person_response_present),
        ("weapon", lambda r: r.weapon_response_present),
    ):
        idx = 0 if channel == "person" else 1
        present = [r for r in rated if truth(r)[idx]]
        absent = [r for r in rated if not truth(r)[idx]]
        if not present or not absent:
            raise ValueError(f"{channel} rates undefined: need both present and "
                             f"absent trials")
        hit = sum(1 for r in present if response(r)) / len(present)
        fa = sum(1 for r in absent if response(r)) / len(absent)
        rates[channel] = (hit, 1.0 - hit, fa, 1.0 - fa)

    ended = [r for r in reports if r.user_action is not None]
    if not ended:
        raise ValueError("no finished searches to aggregate")
    mean_time_s = sum(r.duration_ms for r in ended) / len(ended) / 1000.0

    offsets = {}
    for channel in ("time", "eyemvmt", "detect", "general"):
        vals = [r.trigger_offset_ms(channel) for r in ended]
        offsets[channel] = _mean_or_none([v for v in vals if v is not None])

    p, w = rates["person"], rates["weapon"]
    return SessionMetrics(
        n_trials=len(reports),
        mean_trial_time_s=mean_time_s,
        person_hit_rate=p[0], person_miss_rate=p[1],
        person_fa_rate=p[2], person_cr_rate=p[3],
        weapon_hit_rate=w[0], weapon_miss_rate=w[1],
        weapon_fa_rate=w[2], weapon_cr_rate=w[3],
        mean_time_offset_ms=offsets["time"],
        mean_eyemvmt_offset_ms=offsets["eyemvmt"],
        mean_detect_offset_ms=offsets["detect"],
        mean_general_offset_ms=offsets["general"],
    )
