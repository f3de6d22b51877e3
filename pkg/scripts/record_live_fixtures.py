"""Record live-protocol transcripts for the browser client's test suite.

Drives seeded synthetic observers through LiveConnection and writes the
exact wire text (both directions) to frontend/tests/fixtures/. The
frontend tests replay these transcripts through the client-side view
and assert its invariants against genuine engine output, without
needing a Python runtime of their own.

Run from the repository root after changing the engine or protocol:

    python3 scripts/record_live_fixtures.py
"""

import argparse
import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from aaad.datagen import default_truths, generate_eccentricity_csv, generate_psychometric_csv
from aaad.dataset import FitOptions, fit_bundle_from_csv
from aaad.engine import TrialConfig
from aaad.logio import GazeSample, KeyInput, Tick, event_to_record
from aaad.ppc import Setting
from aaad.server import PROTOCOL, LiveConnection
from aaad.surface import GridGeometry
from aaad.synth import SyntheticObserverParams, synthesize

SETTING = Setting("high", "low", "weapon")
GEOMETRY = GridGeometry().decimated(8)


def demo_bundle():
    truths = default_truths()
    return fit_bundle_from_csv(
        generate_psychometric_csv(truths, seed=7),
        generate_eccentricity_csv(truths, seed=7),
        FitOptions(geometry=GEOMETRY),
    )


def record(conn, events):
    """Send a tickless event stream; return the wire transcript in order.

    Gaze lines dominate the stream (1 kHz) but never change the client
    view, so runs of them are stored as {"from": "client", "gaze": N}
    markers; everything else is kept as verbatim wire text.
    """
    entries = [{"from": "engine", "text": json.dumps(
        {"type": "hello", "protocol": PROTOCOL}, sort_keys=True, separators=(",", ":"))}]
    pending_gaze = 0

    def flush():
        nonlocal pending_gaze
        if pending_gaze:
            entries.append({"from": "client", "gaze": pending_gaze})
            pending_gaze = 0

    for event in events:
        if isinstance(event, Tick):
            continue  # the service synthesizes ticks from event timestamps
        text = json.dumps(event_to_record(event))
        outs = conn.handle(text)
        if isinstance(event, GazeSample):
            pending_gaze += 1
        else:
            flush()
            entries.append({"from": "client", "text": text})
        if outs:
            flush()
            entries.extend({"from": "engine", "text": json.dumps(
                out, sort_keys=True, separators=(",", ":"))} for out in outs)
    flush()
    return entries


def engine_records(entries):
    return [json.loads(e["text"]) for e in entries if e["from"] == "engine"]


def states(entries):
    return [m["state"] for m in engine_records(entries) if m["type"] == "state"]


def reports(entries):
    return [m["report"] for m in engine_records(entries) if m["type"] == "trial_report"]


def with_space_presses(events, times_ms):
    """Inject exploration-map requests into a synthesized stream."""
    merged = [e for e in events if not isinstance(e, Tick)]
    merged.extend(KeyInput(t_ms=t, code="space") for t in times_ms)
    return sorted(merged, key=lambda e: e.t_ms)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=os.path.join(
        os.path.dirname(__file__), "..", "frontend", "tests", "fixtures",
        "transcripts.json"))
    args = parser.parse_args()

    bundle = demo_bundle()

    def observer(seed, stop_policy, stop_ms):
        return SyntheticObserverParams(seed=seed, stop_policy=stop_policy,
                                       stop_param_ms=stop_ms)

    def trial(trial_id, person=False, weapon=True, visible=True):
        return TrialConfig(trial_id=trial_id, image_id="scene-01", setting=SETTING,
                           aid_visible=visible, person_present=person,
                           weapon_present=weapon)

    sessions = []

    # One trial that reaches the recommendation and advances on it.
    conn = LiveConnection(bundle)
    events = synthesize(observer(21, "trigger_plus_reaction", 300.0),
                        trial("fix-satisfied", person=True), bundle)
    entries = record(conn, events)
    assert states(entries) == ["explore", "move_on"], states(entries)
    assert reports(entries)[0]["user_action"] == "satisfied_advance"
    sessions.append({"label": "satisfied_advance", "entries": entries})

    # One trial stopped before any channel triggers: indicator stays red.
    conn = LiveConnection(bundle)
    events = synthesize(observer(33, "fixed_time", 600.0),
                        trial("fix-forced"), bundle)
    entries = record(conn, events)
    assert states(entries) == ["explore"], states(entries)
    assert reports(entries)[0]["user_action"] == "forced_advance"
    sessions.append({"label": "forced_advance", "entries": entries})

    # Map requests mid-search: engine commands the overlay duration.
    conn = LiveConnection(bundle)
    events = with_space_presses(
        synthesize(observer(21, "trigger_plus_reaction", 300.0),
                   trial("fix-maps", weapon=False), bundle),
        times_ms=[400.0, 800.0])
    entries = record(conn, events)
    maps = [m for m in engine_records(entries) if m["type"] == "exploration_map"]
    assert len(maps) == 2 and all(m["duration_ms"] == 120.0 for m in maps), maps
    assert reports(entries)[0]["n_map_requests"] == 2
    sessions.append({"label": "map_requests", "entries": entries})

    # Shadow trial: aid hidden, engine emits no state messages at all.
    conn = LiveConnection(bundle)
    events = synthesize(observer(5, "fixed_time", 2500.0),
                        trial("fix-shadow", visible=False), bundle)
    entries = record(conn, events)
    assert states(entries) == [], states(entries)
    assert reports(entries)[0]["general_trigger_ms"] is not None
    sessions.append({"label": "shadow_aid_hidden", "entries": entries})

    # Three consecutive trials on one connection, mixed presence, so the
    # client's running stats view has both classes for both targets.
    conn = LiveConnection(bundle)
    entries = None
    specs = [(41, trial("fix-s3-0", person=False, weapon=True)),
             (42, trial("fix-s3-1", person=True, weapon=False)),
             (43, trial("fix-s3-2", person=False, weapon=False))]
    for seed, cfg in specs:
        events = synthesize(observer(seed, "trigger_plus_reaction", 300.0),
                            cfg, bundle)
        part = record(conn, events)
        entries = part if entries is None else entries + part[1:]  # one hello
    assert [r["trial_id"] for r in reports(entries)] == [
        "fix-s3-0", "fix-s3-1", "fix-s3-2"]
    assert all(r["complete"] for r in reports(entries))
    sessions.append({"label": "three_trial_session", "entries": entries})

    payload = {
        "note": ("Recorded aaad-live/1 wire transcripts: seeded synthetic "
                 "observers driven through the live service. Runs of gaze "
                 "lines are stored as counts; all other wire text is "
                 "verbatim. Regenerate with scripts/record_live_fixtures.py."),
        "protocol": PROTOCOL,
        "sessions": sessions,
    }
    os.makedirs(os.path.dirname(args.out), exist_ok=True)
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
    n_entries = sum(len(s["entries"]) for s in sessions)
    print(f"wrote {args.out}: {len(sessions)} sessions, {n_entries} wire entries")


if __name__ == "__main__":
    main()
