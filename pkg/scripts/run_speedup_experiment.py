#!/usr/bin/env python3
"""Monte Carlo echo of the closed-loop speed-up claim.

Fits a bundle to freshly generated synthetic data (or loads one), then
races two synthetic observer arms over common random numbers: one that
advances a fixed reaction time after the Move-On recommendation, and a
yoked fixed-duration control.  Prints mean search times, the speed-up
ratio, and Bernoulli-sampled rating accuracy per arm.
"""

import argparse
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from aaad.bundle import ModelBundle
from aaad.datagen import default_truths, generate_eccentricity_csv, generate_psychometric_csv
from aaad.dataset import FitOptions, fit_bundle_from_csv
from aaad.ppc import Setting
from aaad.surface import GridGeometry
from aaad.synth import SyntheticObserverParams, mean_time_ratios, run_simulation


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bundle", default=None,
                    help="fitted bundle to reuse (default: fit synthetic data)")
    ap.add_argument("--setting", default="high-low-weapon")
    ap.add_argument("--trials", type=int, default=500, help="trials per arm")
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--reaction-ms", type=float, default=300.0,
                    help="advance delay after the recommendation")
    ap.add_argument("--fixed-ms", type=float, default=3000.0,
                    help="search duration of the control arm")
    ap.add_argument("--decimate", type=int, default=8,
                    help="grid decimation for the fitted bundle (speed)")
    ap.add_argument("--report", default=None, help="write a JSON summary here")
    args = ap.parse_args(argv)

    if args.bundle:
        bundle = ModelBundle.load(args.bundle)
    else:
        print("fitting a bundle to synthetic data ...")
        truths = default_truths()
        bundle = fit_bundle_from_csv(
            generate_psychometric_csv(truths, seed=7),
            generate_eccentricity_csv(truths, seed=7),
            FitOptions(geometry=GridGeometry().decimated(args.decimate)),
        )

    zoom, clutter, target = args.setting.split("-")
    setting = Setting(zoom, clutter, target)
    thr = bundle.thresholds_for(setting)
    print(f"setting {setting.key}: t*={thr.t_star_ms:.0f}ms  "
          f"e*={thr.e_star:.2f}  d*={thr.d_star:.3f}")

    arms = {
        "trigger": SyntheticObserverParams(
            seed=0, stop_policy="trigger_plus_reaction",
            stop_param_ms=args.reaction_ms, max_duration_ms=120000.0),
        "fixed": SyntheticObserverParams(
            seed=0, stop_policy="fixed_time",
            stop_param_ms=args.fixed_ms, max_duration_ms=120000.0),
    }
    t0 = time.perf_counter()
    out = run_simulation(bundle, setting, arms, n_trials=args.trials, seed=args.seed)
    wall = time.perf_counter() - t0

    def accuracy(arm):
        hits = 0
        for r in arm.reports:
            hits += int(r.person_response_present == r.person_present)
            hits += int(r.weapon_response_present == r.weapon_present)
        return hits / (2 * len(arm.reports))

    summary = {"setting": setting.key, "trials_per_arm": args.trials,
               "seed": args.seed, "arms": {}}
    for name, arm in out.items():
        acc = accuracy(arm)
        summary["arms"][name] = {
            "mean_trial_time_s": arm.metrics.mean_trial_time_s,
            "accuracy": acc,
        }
        print(f"{name:8s} mean {arm.metrics.mean_trial_time_s:6.2f} s   "
              f"accuracy {acc:.3f}")
    ratio = mean_time_ratios(out)["fixed/trigger"]
    summary["speedup"] = ratio
    print(f"speed-up x{ratio:.2f}  ({2 * args.trials} trials in {wall:.1f}s)")

    if args.report:
        Path(args.report).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        print(f"wrote {args.report}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
