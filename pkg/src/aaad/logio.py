"""Line-delimited session logs: the capture format and the replay input.

First line is a schema header, then one JSON record per line with a
"kind" tag and a timestamp in ms from trial start.  write_log emits a
canonical form (sorted keys, compact separators, every field present),
and parse_log of a canonical log roundtrips byte-identically, which is
what makes record/replay symmetry testable.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

from .oculomotor import GazeSample

LOG_SCHEMA = "aaad-log/1"

KEY_CODES = ("right_arrow", "space")
RATING_STAGES = ("person", "weapon")


class LogFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TrialStart:
    t_ms: float
    trial_id: str
    image_id: str
    zoom: str
    clutter: str
    aid_visible: bool = True
    aid_target: str = "weapon"
    person_present: bool = False
    weapon_present: bool = False


@dataclass(frozen=True)
class KeyInput:
    t_ms: float
    code: str

    def __post_init__(self):
        if self.code not in KEY_CODES:
            raise ValueError(f"unknown key code {self.code!r}")


@dataclass(frozen=True)
class Tick:
    t_ms: float


@dataclass(frozen=True)
class Rating:
    t_ms: float
    stage: str
    value: int

    def __post_init__(self):
        if self.stage not in RATING_STAGES:
            raise ValueError(f"unknown rating stage {self.stage!r}")
        if not 1 <= self.value <= 10:
            raise ValueError("rating must be in 1..10")


@dataclass(frozen=True)
class TrialEnd:
    t_ms: float
    reason: str = "advance"


# kind tag <-> event class; field names map straight onto JSON keys
_EVENT_KINDS = {
    "gaze": (GazeSample, ("t_ms", "x_px", "y_px", "valid")),
    "key": (KeyInput, ("t_ms", "code")),
    "tick": (Tick, ("t_ms",)),
    "trial_start": (TrialStart, ("t_ms", "trial_id", "image_id", "zoom", "clutter",
                                 "aid_visible", "aid_target",
                                 "person_present", "weapon_present")),
    "rating": (Rating, ("t_ms", "stage", "value")),
    "trial_end": (TrialEnd, ("t_ms", "reason")),
}
_KIND_BY_CLASS = {cls: kind for kind, (cls, _) in _EVENT_KINDS.items()}


def event_to_record(event) -> dict:
    kind = _KIND_BY_CLASS.get(type(event))
    if kind is None:
        raise LogFormatError(f"cannot serialize {type(event).__name__}")
    _, fields = _EVENT_KINDS[kind]
    record = {"kind": kind}
    for name in fields:
        record[name] = getattr(event, name)
    return record


def write_log(events) -> str:
    lines = [json.dumps({"schema": LOG_SCHEMA}, sort_keys=True, separators=(",", ":"))]
    for event in events:
        lines.append(json.dumps(event_to_record(event), sort_keys=True,
                                separators=(",", ":")))
    return "\n".join(lines) + "\n"


def _event_from_record(record: dict, lineno: int):
    kind = record.get("kind")
    if kind is None:
        raise LogFormatError(f"line {lineno}: record has no kind")
    entry = _EVENT_KINDS.get(kind)
    if entry is None:
        raise LogFormatError(f"line {lineno}: unknown event kind {kind!r}")
    cls, fields = entry
    if "t_ms" not in record:
        raise LogFormatError(f"line {lineno}: missing t_ms")
    kwargs = {}
    for name in fields:
        if name not in record:
            raise LogFormatError(f"line {lineno}: missing field {name!r} for {kind}")
        kwargs[name] = record[name]
    extra = set(record) - set(fields) - {"kind"}
    if extra:
        raise LogFormatError(f"line {lineno}: unexpected fields {sorted(extra)} for {kind}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise LogFormatError(f"line {lineno}: {exc}") from exc


def parse_log(text: str) -> list:
    """Parse an aaad-log/1 document into event objects."""
    events = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogFormatError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
        if not isinstance(record, dict):
            raise LogFormatError(f"line {lineno}: expected an object")
        if not header_seen:
            schema = record.get("schema")
            if schema is None:
                raise LogFormatError(f"line {lineno}: missing schema header")
            if schema != LOG_SCHEMA:
                raise LogFormatError(
                    f"line {lineno}: unsupported log version {schema!r} (want {LOG_SCHEMA})"
                )
            header_seen = True
            continue
        events.append(_event_from_record(record, lineno))
    if not header_seen:
        raise LogFormatError("empty log: no schema header")
    return events


def replay(events, speed: float | None = None):
    """Yield events in order, pacing by timestamp gaps when speed is given.

    speed=None replays as fast as possible; speed=1.0 approximates real
    time.  Timestamps restart at each trial_start, so negative gaps
    across trial boundaries are not slept on.  Logical event content is
    identical at every speed.
    """
    if speed is not None and not speed > 0:
        raise ValueError("speed must be positive")
    prev_t = None
    for event in events:
        if isinstance(event, TrialStart):
            prev_t = None
        if speed is not None and prev_t is not None:
            dt_s = (event.t_ms - prev_t) / 1000.0 / speed
            if dt_s > 0:
                time.sleep(dt_s)
        prev_t = event.t_ms
        yield event
