"""Command-line surface: fit, surface, replay, simulate, serve, report.

Config precedence is flags > environment (AAAD_BUNDLE, AAAD_LOG_DIR) >
defaults.  Exit codes: 0 success, 1 user error, 2 internal error.
Every subcommand validates its inputs before side effects and writes
outputs atomically (temp file + rename), so failures never leave
partial files behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import asdict

import numpy as np

from .bundle import BundleFormatError, ModelBundle
from .dataset import DatasetError, FitOptions, fit_bundle_from_csv
from .engine import aggregate_session, report_to_dict, run_log
from .logio import GazeSample, LogFormatError, TrialStart, parse_log, replay
from .oculomotor import classify_oculomotor
from .ppc import Setting
from .raster import RasterError, read_pgm, write_pgm
from .surface import ClutterMap, compose, exploration_map, single_fixation_surface
from .synth import SyntheticObserverParams, mean_time_ratios, run_simulation

REPLAY_REPORT_SCHEMA = "aaad-replay-report/1"
SIMULATION_REPORT_SCHEMA = "aaad-simulation-report/1"
SESSION_REPORT_SCHEMA = "aaad-session-report/1"


class UserError(Exception):
    """Invalid invocation or input; reported on stderr with exit code 1."""


class _Parser(argparse.ArgumentParser):
    # usage problems are user errors (exit 1), not argparse's default 2
    def error(self, message):
        raise UserError(message)


def _atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".aaad-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: str, doc) -> None:
    _atomic_write(path, (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode())


def _read_text(path: str, what: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UserError(f"cannot read {what} {path!r}: {exc.strerror}") from exc


def _read_bytes(path: str, what: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise UserError(f"cannot read {what} {path!r}: {exc.strerror}") from exc


def _load_bundle(args) -> ModelBundle:
    path = args.bundle or os.environ.get("AAAD_BUNDLE")
    if not path:
        raise UserError("no model bundle: pass --bundle or set AAAD_BUNDLE")
    try:
        return ModelBundle.load(path)
    except FileNotFoundError:
        raise UserError(f"bundle {path!r} does not exist") from None
    except BundleFormatError as exc:
        raise UserError(f"bundle {path!r}: {exc}") from exc


def _parse_setting_key(key: str) -> Setting:
    parts = key.split("-")
    if len(parts) != 3:
        raise UserError(f"setting key {key!r} is not zoom-clutter-target")
    try:
        return Setting(zoom=parts[0], clutter=parts[1], target=parts[2])
    except ValueError as exc:
        raise UserError(str(exc)) from exc


def _session_metrics_or_none(reports):
    try:
        return asdict(aggregate_session(reports))
    except ValueError:
        # degenerate sessions (no complete trials, single-class truth)
        # still get their per-trial reports
        return None


# -- subcommands -------------------------------------------------------------


def _cmd_fit(args) -> None:
    opts = FitOptions(bins=args.bins, sigma_floor=args.sigma_floor)
    try:
        bundle = fit_bundle_from_csv(_read_text(args.data, "dataset"),
                                     _read_text(args.ecc_data, "eccentricity dataset"),
                                     opts)
    except DatasetError as exc:
        raise UserError(str(exc)) from exc
    bundle.save(args.out)
    print(f"wrote {args.out}: {len(bundle.settings)} setting(s)")


def _first_trial(events):
    trials = [i for i, e in enumerate(events) if isinstance(e, TrialStart)]
    if not trials:
        raise UserError("log contains no trial_start record")
    end = trials[1] if len(trials) > 1 else len(events)
    return events[trials[0]], events[trials[0] + 1:end]


def _cmd_surface(args) -> None:
    bundle = _load_bundle(args)
    geom = bundle.geometry
    events = _parse_log_text(_read_text(args.fixations, "log"))
    start, rest = _first_trial(events)
    setting = Setting(zoom=start.zoom, clutter=start.clutter, target=start.aid_target)
    if setting not in bundle.settings:
        raise UserError(f"bundle has no model for setting {setting.key}")
    gaze = [e for e in rest if isinstance(e, GazeSample)]
    fixations = [e.fixation for e in classify_oculomotor(gaze, geom)
                 if e.kind == "fixation_end"]
    surface = compose((single_fixation_surface(f, bundle.family, setting, geom)
                       for f in fixations), geometry=geom)

    clutter = None
    if args.image:
        try:
            values = read_pgm(_read_bytes(args.image, "image"))
        except RasterError as exc:
            raise UserError(f"image {args.image!r}: {exc}") from exc
        if values.shape != (geom.height_px, geom.width_px):
            raise UserError(
                f"image is {values.shape[1]}x{values.shape[0]} px but the bundle "
                f"grid is {geom.width_px}x{geom.height_px}")
        clutter = ClutterMap(geom, values)

    if args.map == "exploration":
        fc = clutter if clutter is not None \
            else ClutterMap(geom, np.ones((geom.height_px, geom.width_px)))
        out = exploration_map(fc, surface).values
    else:
        peak = float(surface.values.max())
        out = surface.values / peak if peak > 0 else surface.values
    _atomic_write(args.out, write_pgm(out))
    print(f"wrote {args.out}: {args.map} map, {len(fixations)} fixation(s)")


def _parse_log_text(text: str):
    try:
        return parse_log(text)
    except LogFormatError as exc:
        raise UserError(str(exc)) from exc


def _parse_speed(raw: str) -> float | None:
    if raw == "max":
        return None
    try:
        speed = float(raw)
    except ValueError:
        raise UserError(f"--speed must be a number or 'max', got {raw!r}") from None
    if not speed > 0:
        raise UserError("--speed must be positive")
    return speed


def _cmd_replay(args) -> None:
    bundle = _load_bundle(args)
    events = _parse_log_text(_read_text(args.log, "log"))
    speed = _parse_speed(args.speed)
    reports = run_log(bundle, replay(events, speed=speed))
    doc = {
        "schema": REPLAY_REPORT_SCHEMA,
        "log": os.path.basename(args.log),
        "n_trials": len(reports),
        "trials": [report_to_dict(r) for r in reports],
        "session": _session_metrics_or_none(reports),
    }
    _write_json(args.report, doc)
    print(f"wrote {args.report}: {len(reports)} trial(s)")


def _observer_arms(doc) -> dict:
    arms_doc = doc.get("arms")
    if not isinstance(arms_doc, dict) or not arms_doc:
        raise UserError("observers file needs a non-empty 'arms' object")
    arms = {}
    for name, fields in arms_doc.items():
        if not isinstance(fields, dict):
            raise UserError(f"arm {name!r} must be an object of parameters")
        try:
            arms[name] = SyntheticObserverParams(seed=0, **fields)
        except TypeError:
            unknown = set(fields) - set(SyntheticObserverParams.__dataclass_fields__)
            raise UserError(f"arm {name!r}: unknown parameter "
                            f"{sorted(unknown)[0]!r}") from None
        except ValueError as exc:
            raise UserError(f"arm {name!r}: {exc}") from exc
    return arms


def _cmd_simulate(args) -> None:
    bundle = _load_bundle(args)
    if args.trials < 1:
        raise UserError("--trials must be at least 1")
    try:
        doc = json.loads(_read_text(args.observers, "observers file"))
    except json.JSONDecodeError as exc:
        raise UserError(f"observers file is not valid JSON: {exc}") from exc
    if "setting" not in doc:
        raise UserError("observers file needs a 'setting' key")
    setting = _parse_setting_key(doc["setting"])
    if setting not in bundle.settings:
        raise UserError(f"bundle has no model for setting {setting.key}")
    prevalence = doc.get("prevalence", 0.5)
    arms = _observer_arms(doc)
    try:
        results = run_simulation(bundle, setting, arms, n_trials=args.trials,
                                 seed=args.seed, prevalence=prevalence)
    except ValueError as exc:
        raise UserError(str(exc)) from exc
    out = {
        "schema": SIMULATION_REPORT_SCHEMA,
        "setting": setting.key,
        "seed": args.seed,
        "trials_per_arm": args.trials,
        "prevalence": prevalence,
        "arms": {name: asdict(arm.metrics) for name, arm in results.items()},
        "mean_time_ratios": mean_time_ratios(results),
    }
    _write_json(args.report, out)
    print(f"wrote {args.report}: {len(arms)} arm(s) x {args.trials} trial(s)")


def _cmd_report(args) -> None:
    bundle = _load_bundle(args)
    logs_dir = args.logs or os.environ.get("AAAD_LOG_DIR")
    if not logs_dir:
        raise UserError("no log directory: pass --logs or set AAAD_LOG_DIR")
    if not os.path.isdir(logs_dir):
        raise UserError(f"log directory {logs_dir!r} does not exist")
    names = sorted(n for n in os.listdir(logs_dir) if n.endswith(".log"))
    if not names:
        raise UserError(f"no .log files in {logs_dir!r}")
    all_reports, per_log = [], []
    for name in names:
        events = _parse_log_text(_read_text(os.path.join(logs_dir, name), "log"))
        reports = run_log(bundle, events)
        per_log.append({"log": name, "n_trials": len(reports)})
        all_reports.extend(reports)
    doc = {
        "schema": SESSION_REPORT_SCHEMA,
        "logs": per_log,
        "n_trials": len(all_reports),
        "trials": [report_to_dict(r) for r in all_reports],
        "session": _session_metrics_or_none(all_reports),
    }
    if args.out:
        _write_json(args.out, doc)
        print(f"wrote {args.out}: {len(all_reports)} trial(s) from {len(names)} log(s)")
    else:
        print(json.dumps(doc, indent=2, sort_keys=True))


def _parse_listen(raw: str) -> tuple[str, int]:
    host, sep, port = raw.rpartition(":")
    if not sep or not host:
        raise UserError(f"--listen must be host:port, got {raw!r}")
    try:
        port_n = int(port)
    except ValueError:
        raise UserError(f"--listen port {port!r} is not a number") from None
    if not 0 < port_n < 65536:
        raise UserError(f"--listen port {port_n} out of range")
    return host, port_n


def _cmd_serve(args) -> None:
    bundle = _load_bundle(args)  # validate before binding
    host, port = _parse_listen(args.listen)
    if args.assets and not os.path.isdir(args.assets):
        raise UserError(f"assets directory {args.assets!r} does not exist")
    from .server import serve_forever

    serve_forever(bundle, assets_dir=args.assets, host=host, port=port)


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="aaad",
        description="Attention allocation aid: fit perceptual models, replay and "
                    "simulate search sessions, serve live ones.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def bundle_flag(p):
        p.add_argument("--bundle", default=None,
                       help="model bundle path (default: $AAAD_BUNDLE)")

    p = sub.add_parser("fit", help="fit a model bundle from psychometric CSVs")
    p.add_argument("--data", required=True, help="main psychometric CSV")
    p.add_argument("--ecc-data", required=True,
                   help="forced-fixation eccentricity CSV")
    p.add_argument("--out", required=True, help="output bundle path")
    p.add_argument("--bins", type=int, default=10,
                   help="equal-count bins for the detectability curve")
    p.add_argument("--sigma-floor", type=float, default=0.005,
                   help="lower bound for interpolated PC dispersion")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("surface", help="render a detectability or exploration map")
    bundle_flag(p)
    p.add_argument("--fixations", required=True,
                   help="event log; fixations come from its first trial")
    p.add_argument("--image", default=None, help="clutter prior as a PGM graymap")
    p.add_argument("--out", required=True, help="output PGM path")
    p.add_argument("--map", choices=("exploration", "detectability"),
                   default="detectability")
    p.set_defaults(func=_cmd_surface)

    p = sub.add_parser("replay", help="replay a log into trial reports")
    bundle_flag(p)
    p.add_argument("--log", required=True)
    p.add_argument("--speed", default="max",
                   help="pacing multiplier or 'max' (default)")
    p.add_argument("--report", required=True, help="output JSON path")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("simulate", help="Monte Carlo over synthetic observer arms")
    bundle_flag(p)
    p.add_argument("--observers", required=True,
                   help="JSON file: setting, prevalence, arms")
    p.add_argument("--trials", type=int, required=True, help="trials per arm")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--report", required=True, help="output JSON path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("report", help="aggregate a directory of session logs")
    bundle_flag(p)
    p.add_argument("--logs", default=None,
                   help="directory of .log files (default: $AAAD_LOG_DIR)")
    p.add_argument("--out", default=None, help="output JSON path (default: stdout)")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("serve", help="serve live sessions plus static UI assets")
    bundle_flag(p)
    p.add_argument("--assets", default=None, help="static UI directory")
    p.add_argument("--listen", default="127.0.0.1:8750", help="host:port")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
        return 0
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 0
    except (DatasetError, LogFormatError, BundleFormatError, RasterError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
