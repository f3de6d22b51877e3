#!/usr/bin/env python3
"""Generate the synthetic psychophysics CSVs and optionally fit them back.

Writes psychometric.csv (time / eye-movement / detectability channels) and
eccentricity.csv from the built-in ground-truth observers, then, with
--fit, runs the full pipeline on its own output and prints recovered vs
generating parameters per setting.  Useful as a smoke test of the whole
fit stack and as a source of reproducible fixtures.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from aaad.datagen import default_truths, generate_eccentricity_csv, generate_psychometric_csv
from aaad.dataset import FitOptions, fit_bundle_from_csv


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data", help="output directory (default: data/)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-per-condition", type=int, default=800,
                    help="trials per metric condition and setting")
    ap.add_argument("--n-detect", type=int, default=6000,
                    help="detectability trials per setting")
    ap.add_argument("--n-per-cell", type=int, default=400,
                    help="trials per duration x eccentricity cell")
    ap.add_argument("--fit", action="store_true",
                    help="fit the generated CSVs and print parameter recovery")
    ap.add_argument("--bundle-out", default=None,
                    help="with --fit, also save the fitted bundle here")
    args = ap.parse_args(argv)

    truths = default_truths()
    psych = generate_psychometric_csv(truths, n_per_condition=args.n_per_condition,
                                      n_detect=args.n_detect, seed=args.seed)
    ecc = generate_eccentricity_csv(truths, n_per_cell=args.n_per_cell, seed=args.seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "psychometric.csv").write_text(psych)
    (out / "eccentricity.csv").write_text(ecc)
    print(f"wrote {out / 'psychometric.csv'} ({psych.count(chr(10)) - 1} rows)")
    print(f"wrote {out / 'eccentricity.csv'} ({ecc.count(chr(10)) - 1} rows)")

    if not args.fit:
        return 0

    bundle = fit_bundle_from_csv(psych, ecc, FitOptions())
    for setting, truth in sorted(truths.items(), key=lambda kv: kv[0].key):
        model = bundle.model_for(setting)
        tc, ec, dc = model.time_curve, model.eyemvmt_curve, model.detect_ppc
        print(f"\nsetting {setting.key}")
        rows = [
            ("time alpha", truth.time_alpha, tc.dprime_curve.alpha),
            ("time beta", truth.time_beta, tc.dprime_curve.beta),
            ("time lambda", truth.time_lambda, tc.lambda_),
            ("eye alpha", truth.eye_alpha, ec.dprime_curve.alpha),
            ("eye beta", truth.eye_beta, ec.dprime_curve.beta),
            ("detect pc_inf", truth.det_pc_inf, dc.pc_inf),
            ("detect gamma", truth.det_gamma, dc.gamma),
        ]
        for name, want, got in rows:
            print(f"  {name:14s} true {want:10.5f}  fit {got:10.5f}")
        thr = model.thresholds
        print(f"  thresholds     t*={thr.t_star_ms:.1f}ms  e*={thr.e_star:.2f}  "
              f"d*={thr.d_star:.3f}")

    if args.bundle_out:
        bundle.save(args.bundle_out)
        print(f"\nwrote {args.bundle_out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
