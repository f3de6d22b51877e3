"""Psychometric CSV ingestion and the per-setting fit pipeline.

Main dataset: one row per trial with header
setting_zoom,setting_clutter,target,metric_kind,metric_value,target_present,response_present
(booleans 0/1; metric_value in ms, saccade count, or D' units per
metric_kind).  Eccentricity dataset (forced-fixation detection trials)
adds time_condition_ms and ecc_deg columns.  fit_bundle turns both into
a ready-to-serve model bundle, reporting failures per setting and
channel so bad slices are findable.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from collections import defaultdict

from .bundle import ModelBundle, build_setting_model
from .ppc import (
    METRIC_KINDS,
    Setting,
    build_pc_curve,
    fit_detectability_ppc,
    fit_exponential,
    fit_log_eccentricity,
    lambda_for_eyemvmt_ppc,
    lambda_for_time_ppc,
)
from .satisfaction import SatisfactionConfig
from .sdt import ConfusionCounts, PriorWeights, dprime_lambda, probit, rates_from_counts
from .surface import GridGeometry

MAIN_COLUMNS = ("setting_zoom", "setting_clutter", "target", "metric_kind",
                "metric_value", "target_present", "response_present")
ECC_COLUMNS = ("setting_zoom", "setting_clutter", "target", "time_condition_ms",
               "ecc_deg", "target_present", "response_present")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class PsychRecord:
    setting: Setting
    metric_kind: str
    metric_value: float
    target_present: bool
    response_present: bool


@dataclass(frozen=True)
class EccRecord:
    setting: Setting
    time_condition_ms: float
    ecc_deg: float
    target_present: bool
    response_present: bool


@dataclass(frozen=True)
class FitOptions:
    bins: int = 10
    sigma_floor: float = 0.005
    epsilon: float = 0.02
    eta: float = 0.025
    geometry: GridGeometry = GridGeometry()

    def satisfaction(self) -> SatisfactionConfig:
        return SatisfactionConfig(epsilon=self.epsilon, eta=self.eta,
                                  sigma_floor=self.sigma_floor)


def _parse_bool(raw: str, column: str, lineno: int) -> bool:
    if raw == "1":
        return True
    if raw == "0":
        return False
    raise DatasetError(f"row {lineno}: {column} must be 0 or 1, got {raw!r}")


def _open_reader(text: str, required) -> csv.DictReader:
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [c for c in required if c not in header]
    if missing:
        raise DatasetError(f"missing column {missing[0]!r}")
    extra = [c for c in header if c not in required]
    if extra:
        raise DatasetError(f"unknown column {extra[0]!r}")
    return reader


def _row_setting(row, lineno) -> Setting:
    try:
        return Setting(zoom=row["setting_zoom"], clutter=row["setting_clutter"],
                       target=row["target"])
    except ValueError as exc:
        raise DatasetError(f"row {lineno}: {exc}") from exc


def read_psychometric_csv(text: str) -> list[PsychRecord]:
    reader = _open_reader(text, MAIN_COLUMNS)
    records = []
    for lineno, row in enumerate(reader, start=2):
        setting = _row_setting(row, lineno)
        kind = row["metric_kind"]
        if kind not in METRIC_KINDS:
            raise DatasetError(f"row {lineno}: unknown metric_kind {kind!r}")
        try:
            value = float(row["metric_value"])
        except ValueError:
            raise DatasetError(
                f"row {lineno}: metric_value {row['metric_value']!r} is not a number"
            ) from None
        if not (math.isfinite(value) and value >= 0):
            raise DatasetError(f"row {lineno}: metric_value must be >= 0")
        records.append(PsychRecord(
            setting=setting,
            metric_kind=kind,
            metric_value=value,
            target_present=_parse_bool(row["target_present"], "target_present", lineno),
            response_present=_parse_bool(row["response_present"], "response_present",
                                         lineno),
        ))
    if not records:
        raise DatasetError("dataset has no rows")
    return records


def read_eccentricity_csv(text: str) -> list[EccRecord]:
    reader = _open_reader(text, ECC_COLUMNS)
    records = []
    for lineno, row in enumerate(reader, start=2):
        setting = _row_setting(row, lineno)
        try:
            cond = float(row["time_condition_ms"])
            ecc = float(row["ecc_deg"])
        except ValueError:
            raise DatasetError(f"row {lineno}: non-numeric condition or eccentricity") from None
        if not cond > 0:
            raise DatasetError(f"row {lineno}: time_condition_ms must be positive")
        if not ecc >= 1.0:
            raise DatasetError(f"row {lineno}: ecc_deg must be >= 1")
        records.append(EccRecord(
            setting=setting,
            time_condition_ms=cond,
            ecc_deg=ecc,
            target_present=_parse_bool(row["target_present"], "target_present", lineno),
            response_present=_parse_bool(row["response_present"], "response_present",
                                         lineno),
        ))
    if not records:
        raise DatasetError("eccentricity dataset has no rows")
    return records


def _confusion(rows) -> ConfusionCounts:
    hits = sum(1 for r in rows if r.target_present and r.response_present)
    misses = sum(1 for r in rows if r.target_present and not r.response_present)
    fas = sum(1 for r in rows if not r.target_present and r.response_present)
    crs = sum(1 for r in rows if not r.target_present and not r.response_present)
    return ConfusionCounts(hits=hits, misses=misses, false_alarms=fas,
                           correct_rejections=crs)


def _pc_knot(rows) -> tuple[float, float]:
    """Empirical PC and its binomial stderr (half-count corrected at 0/1)."""
    n = len(rows)
    correct = sum(1 for r in rows if r.target_present == r.response_present)
    pc = correct / n
    safe = min(max(pc, 0.5 / n), 1.0 - 0.5 / n)
    return pc, math.sqrt(safe * (1.0 - safe) / n)


def _by_condition(rows) -> list[tuple[float, list]]:
    groups = defaultdict(list)
    for r in rows:
        groups[r.metric_value].append(r)
    return sorted(groups.items())


_NORM_CONST = 1.0 / math.sqrt(2.0 * math.pi)


def _lambda_stderr(fa_rate: float, n_noise: int) -> float:
    # delta method: lambda = -probit(far), so se = se(far) / phi(probit(far))
    se_far = math.sqrt(fa_rate * (1.0 - fa_rate) / n_noise)
    z = probit(fa_rate)
    density = _NORM_CONST * math.exp(-0.5 * z * z)
    return max(se_far / density, 1e-9)


def _fit_rate_channel(rows, metric_kind: str, setting: Setting, opts: FitOptions):
    """Shared time/eye-movement pipeline: per-condition SDT, then the PC curve."""
    conditions = _by_condition(rows)
    points, knots, fa_rates, lambda_estimates = [], [], [], []
    for value, group in conditions:
        counts = _confusion(group)
        hr, far = rates_from_counts(counts)
        indices = dprime_lambda(hr, far)
        points.append((value, indices.d_prime, float(len(group))))
        pc, se = _pc_knot(group)
        knots.append((value, pc, se))
        fa_rates.append(far)
        lambda_estimates.append((indices.lambda_, _lambda_stderr(far, counts.n_noise)))
    dp = fit_exponential(points, metric_kind=metric_kind, setting=setting)
    if metric_kind == "time_ms":
        lam = lambda_for_time_ppc(fa_rates)
    else:
        lam = lambda_for_eyemvmt_ppc(lambda_estimates)
    n_present = sum(1 for r in rows if r.target_present)
    weights = PriorWeights(n_present / len(rows))
    return build_pc_curve(dp, lam, weights, knots, sigma_floor=opts.sigma_floor)


def _fit_ecc_family(rows, setting: Setting):
    by_cond = defaultdict(lambda: defaultdict(list))
    for r in rows:
        by_cond[r.time_condition_ms][r.ecc_deg].append(r)
    curves = []
    for cond in sorted(by_cond):
        points = []
        for ecc in sorted(by_cond[cond]):
            hr, far = rates_from_counts(_confusion(by_cond[cond][ecc]))
            points.append((ecc, dprime_lambda(hr, far).d_prime))
        curves.append(fit_log_eccentricity(points, time_condition_ms=cond))
    return tuple(curves)


def fit_bundle(records, ecc_records, options: FitOptions | None = None) -> ModelBundle:
    """Fit every setting found in the main dataset into a model bundle.

    Every setting needs all three channels plus eccentricity data;
    errors name the setting and channel they came from.
    """
    opts = options or FitOptions()
    by_setting = defaultdict(lambda: defaultdict(list))
    for r in records:
        by_setting[r.setting][r.metric_kind].append(r)
    ecc_by_setting = defaultdict(list)
    for r in ecc_records:
        ecc_by_setting[r.setting].append(r)

    sat = opts.satisfaction()
    models = {}
    for setting in sorted(by_setting, key=lambda s: s.key):
        channels = by_setting[setting]
        for kind in METRIC_KINDS:
            if not channels[kind]:
                raise DatasetError(f"setting {setting.key}: no {kind} rows")
        if not ecc_by_setting[setting]:
            raise DatasetError(f"setting {setting.key}: no eccentricity data")
        try:
            time_curve = _fit_rate_channel(channels["time_ms"], "time_ms", setting, opts)
        except ValueError as exc:
            raise DatasetError(f"setting {setting.key}, time channel: {exc}") from exc
        try:
            eye_curve = _fit_rate_channel(channels["eye_movements"], "eye_movements",
                                          setting, opts)
        except ValueError as exc:
            raise DatasetError(
                f"setting {setting.key}, eye-movement channel: {exc}") from exc
        try:
            det = fit_detectability_ppc(
                [(r.metric_value, r.target_present == r.response_present)
                 for r in channels["d_score"]],
                bins=opts.bins, setting=setting, sigma_floor=opts.sigma_floor,
            )
        except ValueError as exc:
            raise DatasetError(
                f"setting {setting.key}, detectability channel: {exc}") from exc
        try:
            ecc_curves = _fit_ecc_family(ecc_by_setting[setting], setting)
            models[setting] = build_setting_model(time_curve, eye_curve, det,
                                                  ecc_curves, sat)
        except ValueError as exc:
            raise DatasetError(f"setting {setting.key}: {exc}") from exc
    return ModelBundle(models, geometry=opts.geometry, satisfaction=sat)


def fit_bundle_from_csv(main_text: str, ecc_text: str,
                        options: FitOptions | None = None) -> ModelBundle:
    return fit_bundle(read_psychometric_csv(main_text),
                      read_eccentricity_csv(ecc_text), options)
