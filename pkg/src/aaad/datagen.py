"""Synthetic psychometric datasets with known generating parameters.

Produces the two CSVs the fit pipeline consumes, from a per-setting
ground truth (exponential d' growth in time and saccade count, a
saturating accuracy curve in D', log-eccentricity falloff per duration
condition).  Generation is a pure function of (truth, sizes, seed), so
fitted bundles in tests and experiments are reproducible.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .ppc import Setting
from .sdt import normal_cdf

TIME_CONDITIONS_MS = (200.0, 400.0, 800.0, 1800.0, 3200.0)
EYE_CONDITIONS = (1.0, 2.0, 4.0, 8.0, 16.0)
ECC_TIME_CONDITIONS_MS = (100.0, 200.0, 400.0, 900.0, 1600.0)
ECC_DEGREES = (1.0, 2.0, 4.0, 8.0, 12.0)


@dataclass(frozen=True)
class ChannelTruth:
    """Generating parameters for one setting."""

    time_alpha: float = 2.0
    time_beta: float = 0.0025  # per ms
    time_lambda: float = 1.0
    eye_alpha: float = 2.2
    eye_beta: float = 0.45  # per saccade
    eye_lambda: float = 1.0
    det_pc_inf: float = 0.95
    det_gamma: float = 0.8
    det_max_d: float = 6.0
    ecc_lambda: float = 0.5
    # (duration_ms, alpha_e, beta_e): sensitivity vs log-eccentricity per
    # fixation-duration condition
    ecc_params: tuple = (
        (100.0, 1.6, -0.55),
        (200.0, 1.9, -0.55),
        (400.0, 2.2, -0.6),
        (900.0, 2.5, -0.6),
        (1600.0, 2.7, -0.6),
    )

    def time_d_prime(self, t_ms: float) -> float:
        return self.time_alpha * -math.expm1(-self.time_beta * t_ms)

    def eye_d_prime(self, count: float) -> float:
        return self.eye_alpha * -math.expm1(-self.eye_beta * count)

    def detect_pc(self, d: float) -> float:
        return self.det_pc_inf - (self.det_pc_inf - 0.5) * math.exp(-self.det_gamma * d)

    def ecc_d_prime(self, cond_ms: float, ecc_deg: float) -> float:
        for cond, alpha_e, beta_e in self.ecc_params:
            if cond == cond_ms:
                return alpha_e + beta_e * math.log(max(ecc_deg, 1.0))
        raise ValueError(f"no eccentricity condition at {cond_ms} ms")


def default_truths() -> dict:
    """Ground truth for the stock demo settings (weapon channel drives the aid)."""
    return {
        Setting("high", "low", "weapon"): ChannelTruth(),
        Setting("medium", "medium", "weapon"): ChannelTruth(
            time_beta=0.0015, eye_beta=0.3, det_gamma=0.6,
        ),
    }


def _detection_rows(rng, n: int, d_prime: float, lam: float):
    """(target_present, response_present) pairs from the equal-variance model."""
    p_hit = normal_cdf(d_prime - lam)
    p_fa = normal_cdf(-lam)
    n_present = n // 2
    rows = []
    for i in range(n):
        present = i < n_present
        p = p_hit if present else p_fa
        rows.append((present, bool(rng.random() < p)))
    return rows


def generate_psychometric_csv(truths: dict | None = None, n_per_condition: int = 800,
                              n_detect: int = 6000, seed: int = 0) -> str:
    """Main dataset: time, eye-movement and detectability trials per setting."""
    truths = truths if truths is not None else default_truths()
    if n_per_condition < 4 or n_detect < 20:
        raise ValueError("dataset sizes too small to fit")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["setting_zoom", "setting_clutter", "target", "metric_kind",
                     "metric_value", "target_present", "response_present"])
    for setting in sorted(truths, key=lambda s: s.key):
        truth = truths[setting]
        for t in TIME_CONDITIONS_MS:
            for present, resp in _detection_rows(rng, n_per_condition,
                                                 truth.time_d_prime(t),
                                                 truth.time_lambda):
                writer.writerow([setting.zoom, setting.clutter, setting.target,
                                 "time_ms", t, int(present), int(resp)])
        for count in EYE_CONDITIONS:
            for present, resp in _detection_rows(rng, n_per_condition,
                                                 truth.eye_d_prime(count),
                                                 truth.eye_lambda):
                writer.writerow([setting.zoom, setting.clutter, setting.target,
                                 "eye_movements", count, int(present), int(resp)])
        for _ in range(n_detect):
            d = float(rng.uniform(0.0, truth.det_max_d))
            correct = bool(rng.random() < truth.detect_pc(d))
            present = bool(rng.random() < 0.5)
            resp = present if correct else not present
            writer.writerow([setting.zoom, setting.clutter, setting.target,
                             "d_score", d, int(present), int(resp)])
    return buf.getvalue()


def generate_eccentricity_csv(truths: dict | None = None, n_per_cell: int = 400,
                              seed: int = 0) -> str:
    """Forced-fixation detection trials over duration x eccentricity cells."""
    truths = truths if truths is not None else default_truths()
    if n_per_cell < 4:
        raise ValueError("dataset sizes too small to fit")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["setting_zoom", "setting_clutter", "target", "time_condition_ms",
                     "ecc_deg", "target_present", "response_present"])
    for setting in sorted(truths, key=lambda s: s.key):
        truth = truths[setting]
        for cond, _, _ in truth.ecc_params:
            for ecc in ECC_DEGREES:
                d = truth.ecc_d_prime(cond, ecc)
                for present, resp in _detection_rows(rng, n_per_cell, d,
                                                     truth.ecc_lambda):
                    writer.writerow([setting.zoom, setting.clutter, setting.target,
                                     cond, ecc, int(present), int(resp)])
    return buf.getvalue()
