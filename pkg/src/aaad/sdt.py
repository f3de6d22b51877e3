"""Equal-variance signal detection theory primitives.

Everything downstream (curve fitting, satisfaction thresholds, trial
scoring) funnels through the four conversions in this module:

    counts -> (hit rate, false alarm rate)     rates_from_counts
    rates  -> (d', lambda)                     dprime_lambda
    (d', lambda) -> proportion correct         pc_from_indices
    probability <-> z-score                    probit / normal_cdf

All functions are pure and operate on scalars; they are safe to call
concurrently from any number of threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "ConfusionCounts",
    "DetectionIndices",
    "PriorWeights",
    "probit",
    "normal_cdf",
    "rates_from_counts",
    "dprime_lambda",
    "pc_from_indices",
]

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Largest double strictly below 1.0 and smallest positive double; used to
# keep normal_cdf inside the open interval (0, 1) at extreme arguments.
_P_HI = math.nextafter(1.0, 0.0)
_P_LO = 5e-324


@dataclass(frozen=True)
class ConfusionCounts:
    """Trial outcome counts for one condition of a yes/no task."""

    hits: int
    misses: int
    false_alarms: int
    correct_rejections: int

    def __post_init__(self) -> None:
        for name in ("hits", "misses", "false_alarms", "correct_rejections"):
            v = getattr(self, name)
            if v < 0:
                raise ValueError(f"{name} must be >= 0, got {v}")

    @property
    def n_signal(self) -> int:
        return self.hits + self.misses

    @property
    def n_noise(self) -> int:
        return self.false_alarms + self.correct_rejections


@dataclass(frozen=True)
class DetectionIndices:
    """Sensitivity d' and criterion lambda under the equal-variance model."""

    d_prime: float
    lambda_: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.d_prime) and math.isfinite(self.lambda_)):
            raise ValueError("detection indices must be finite")


@dataclass(frozen=True)
class PriorWeights:
    """Mixture weights for signal-present (m) vs signal-absent (n) trials.

    n is derived as 1 - m so the pair always sums to one exactly.
    """

    m: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.m <= 1.0:
            raise ValueError(f"m must lie in [0, 1], got {self.m}")

    @property
    def n(self) -> float:
        return 1.0 - self.m


# Coefficients of Acklam's rational approximation to the inverse normal
# CDF (relative error < 1.15e-9 before refinement).
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)

_P_LOW = 0.02425
_P_HIGH = 1.0 - _P_LOW


def _probit_rational(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    if p > _P_HIGH:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                 / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    q = p - 0.5
    r = q * q
    return ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
            / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))


def probit(p: float) -> float:
    """Inverse of the standard normal CDF.

    Rational approximation refined by one Halley step against
    :func:`normal_cdf`; absolute error is below 1e-9 everywhere and near
    machine precision away from the extreme tails. Raises ``ValueError``
    outside the open interval (0, 1).
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"probit is defined on (0, 1), got {p!r}")
    z = _probit_rational(p)
    # Halley refinement; skipped in the far tails where exp(z^2/2) would
    # overflow (the rational estimate is already ~1e-9 accurate there).
    if z * z < 1400.0:
        e = normal_cdf(z) - p
        u = e * _SQRT_2PI * math.exp(0.5 * z * z)
        z -= u / (1.0 + 0.5 * z * u)
    return z


def normal_cdf(z: float) -> float:
    """Standard normal CDF, saturating smoothly inside the open (0, 1)."""
    if math.isnan(z):
        raise ValueError("normal_cdf requires a finite argument")
    p = 0.5 * math.erfc(-z / _SQRT2)
    if p <= 0.0:
        return _P_LO
    if p >= 1.0:
        return _P_HI
    return p


def _corrected_rate(successes: int, n: int) -> float:
    # Extreme rates are pulled off 0 and 1 by the 1/(2N) rule, with N the
    # number of trials in that class, so the probit transform stays finite.
    if n <= 0:
        raise ValueError("rate requires at least one trial in the class")
    if successes == 0:
        return 1.0 / (2.0 * n)
    if successes == n:
        return 1.0 - 1.0 / (2.0 * n)
    return successes / n


def rates_from_counts(counts: ConfusionCounts) -> tuple[float, float]:
    """Hit and false alarm rates with the 1/(2N) extreme-rate correction.

    Raises ``ValueError`` when either trial class is empty.
    """
    if counts.n_signal == 0:
        raise ValueError("no signal-present trials: hit rate undefined")
    if counts.n_noise == 0:
        raise ValueError("no signal-absent trials: false alarm rate undefined")
    hit_rate = _corrected_rate(counts.hits, counts.n_signal)
    fa_rate = _corrected_rate(counts.false_alarms, counts.n_noise)
    return hit_rate, fa_rate


def dprime_lambda(hit_rate: float, fa_rate: float) -> DetectionIndices:
    """Convert a (hit rate, false alarm rate) pair to (d', lambda).

    d' = Z(HR) - Z(FAR) and lambda = -Z(FAR), with Z the probit.
    """
    z_fa = probit(fa_rate)
    return DetectionIndices(d_prime=probit(hit_rate) - z_fa, lambda_=-z_fa)


def pc_from_indices(indices: DetectionIndices, weights: PriorWeights) -> float:
    """Expected proportion correct of an observer with the given indices.

    The mixture m * HitRate + n * CorrectRejectionRate, with
    HitRate = Phi(d' - lambda) and CorrectRejectionRate = 1 - Phi(-lambda).
    """
    hit_rate = normal_cdf(indices.d_prime - indices.lambda_)
    cr_rate = 1.0 - normal_cdf(-indices.lambda_)
    pc = weights.m * hit_rate + weights.n * cr_rate
    return min(max(pc, _P_LO), _P_HI)
