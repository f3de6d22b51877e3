"""Perceptual performance curve fitting.

Three curve families relate probability correct to the resources spent
searching an image: elapsed time, number of eye movements, and the
composite detectability score accumulated over fixations.  Time and
eye-movement curves are fitted in d' space with the saturating
exponential d'(x) = alpha * (1 - exp(-beta x)) and converted to PC
through the equal-variance observer; the detectability curve is
regressed directly in PC space, pinned at chance for a zero score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sdt import DetectionIndices, PriorWeights, pc_from_indices, probit
from .surface import LogEccentricityCurve

ZOOM_LEVELS = ("high", "medium", "low")
CLUTTER_LEVELS = ("high", "medium", "low")
TARGET_KINDS = ("person", "weapon")
METRIC_KINDS = ("time_ms", "eye_movements", "d_score")

# 1D search bracket for the saturating-exponential rate constant,
# in inverse units of the metric.
RATE_BRACKET = (1e-5, 10.0)
RATE_GRID_POINTS = 241

SIGMA_FLOOR = 0.005
DEFAULT_BINS = 10


@dataclass(frozen=True)
class Setting:
    """One stimulus condition: zoom level, clutter level and target kind."""

    zoom: str
    clutter: str
    target: str

    def __post_init__(self):
        if self.zoom not in ZOOM_LEVELS:
            raise ValueError(f"unknown zoom level {self.zoom!r}")
        if self.clutter not in CLUTTER_LEVELS:
            raise ValueError(f"unknown clutter level {self.clutter!r}")
        if self.target not in TARGET_KINDS:
            raise ValueError(f"unknown target kind {self.target!r}")

    @property
    def key(self) -> str:
        return f"{self.zoom}-{self.clutter}-{self.target}"

    @classmethod
    def from_key(cls, key: str) -> "Setting":
        zoom, clutter, target = key.split("-")
        return cls(zoom=zoom, clutter=clutter, target=target)


def all_settings():
    return [
        Setting(z, c, t) for z in ZOOM_LEVELS for c in CLUTTER_LEVELS for t in TARGET_KINDS
    ]


@dataclass(frozen=True)
class ExponentialPPC:
    """Saturating d' growth: d'(x) = alpha * (1 - exp(-beta x))."""

    alpha: float
    beta: float
    metric_kind: str = "time_ms"
    setting: Setting | None = None
    saturated: bool = False

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError("alpha must be positive and finite")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError("beta must be positive and finite")
        if self.metric_kind not in METRIC_KINDS:
            raise ValueError(f"unknown metric kind {self.metric_kind!r}")

    def d_prime(self, x):
        return self.alpha * -np.expm1(-self.beta * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class PCCurve:
    """PC as a function of a search metric, with a pointwise uncertainty profile.

    PC(x) passes the fitted d'(x) through the equal-variance observer at a
    fixed criterion; sigma(x) interpolates the binned empirical PC standard
    errors (clamped to the end knots, floored at sigma_floor).
    """

    dprime_curve: ExponentialPPC
    lambda_: float
    weights: PriorWeights
    sigma_knots_x: tuple[float, ...] = ()
    sigma_knots_y: tuple[float, ...] = ()
    sigma_floor: float = SIGMA_FLOOR

    def __post_init__(self):
        if len(self.sigma_knots_x) != len(self.sigma_knots_y):
            raise ValueError("sigma knot arrays differ in length")
        if any(b <= a for a, b in zip(self.sigma_knots_x, self.sigma_knots_x[1:])):
            raise ValueError("sigma knots must be sorted by x")
        if not self.sigma_floor > 0:
            raise ValueError("sigma_floor must be positive")

    @property
    def pc_max(self) -> float:
        """Asymptotic PC as the metric grows without bound."""
        return pc_from_indices(
            DetectionIndices(self.dprime_curve.alpha, self.lambda_), self.weights
        )

    def pc(self, x: float) -> float:
        d = float(self.dprime_curve.d_prime(x))
        return pc_from_indices(DetectionIndices(d, self.lambda_), self.weights)

    def sigma(self, x: float) -> float:
        if not self.sigma_knots_x:
            return self.sigma_floor
        s = float(np.interp(x, self.sigma_knots_x, self.sigma_knots_y))
        return max(s, self.sigma_floor)

    def search_domain(self) -> float:
        """Upper metric bound past which PC(x) is at pc_max to float precision."""
        hi = 40.0 / self.dprime_curve.beta
        if self.sigma_knots_x:
            hi = max(hi, self.sigma_knots_x[-1])
        return max(hi, 1.0)


@dataclass(frozen=True)
class DetectabilityPPC:
    """PC against the composite detectability score, pinned at chance for zero."""

    pc_inf: float
    gamma: float
    setting: Setting | None = None
    ceiling_clamped: bool = False
    sigma_knots_x: tuple[float, ...] = ()
    sigma_knots_y: tuple[float, ...] = ()
    sigma_floor: float = SIGMA_FLOOR

    def __post_init__(self):
        if not (0.5 <= self.pc_inf < 1.0):
            raise ValueError("pc_inf must lie in [0.5, 1)")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError("gamma must be positive and finite")
        if len(self.sigma_knots_x) != len(self.sigma_knots_y):
            raise ValueError("sigma knot arrays differ in length")
        if not self.sigma_floor > 0:
            raise ValueError("sigma_floor must be positive")

    @property
    def pc_max(self) -> float:
        return self.pc_inf

    def pc(self, d_score):
        d = np.asarray(d_score, dtype=float)
        return self.pc_inf - (self.pc_inf - 0.5) * np.exp(-self.gamma * d)

    def sigma(self, x: float) -> float:
        if not self.sigma_knots_x:
            return self.sigma_floor
        s = float(np.interp(x, self.sigma_knots_x, self.sigma_knots_y))
        return max(s, self.sigma_floor)

    def search_domain(self) -> float:
        hi = 40.0 / self.gamma
        if self.sigma_knots_x:
            hi = max(hi, self.sigma_knots_x[-1])
        return max(hi, 1.0)


def _profiled_rate_fit(xs, ys, ws):
    """Minimize sum w*(y - a*(1 - exp(-r x)))^2 over (a, r).

    For fixed rate r the optimal amplitude has a closed form, so the fit
    scans a log-spaced grid over r, refines the best bracket by golden
    section, and finishes with one Gauss-Newton step.  Returns
    (a, r, saturated): saturated means the grid top was the best rate,
    i.e. the data carry no information about r beyond "large".
    """

    def amp_for(rate):
        g = -np.expm1(-rate * xs)
        denom = float(np.sum(ws * g * g))
        if denom <= 0.0:
            return 0.0, g
        return float(np.sum(ws * ys * g) / denom), g

    def sse_profiled(rate):
        a, g = amp_for(rate)
        r = ys - a * g
        return float(np.sum(ws * r * r))

    def sse_full(a, rate):
        r = ys - a * -np.expm1(-rate * xs)
        return float(np.sum(ws * r * r))

    grid = np.geomspace(RATE_BRACKET[0], RATE_BRACKET[1], RATE_GRID_POINTS)
    sses = [sse_profiled(b) for b in grid]
    best = int(np.argmin(sses))
    # the bracket top fitting as well as the optimum means the data are
    # flat at the asymptote already: the rate is only bounded below
    scale = float(np.sum(ws * ys * ys)) or 1.0
    saturated = sses[-1] <= sses[best] + 1e-9 * scale
    if saturated:
        rate = float(grid[-1])
    else:
        lo = float(grid[max(best - 1, 0)])
        hi = float(grid[min(best + 1, len(grid) - 1)])
        rate = _golden_section(sse_profiled, lo, hi)
    a, _ = amp_for(rate)
    if not saturated:
        a, rate = _gauss_newton_step(xs, ys, ws, a, rate, sse_full)
    return a, rate, saturated


def _golden_section(f, lo, hi, rel_tol=1e-12, max_iter=200):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if hi - lo <= rel_tol * (abs(lo) + abs(hi)):
            break
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = f(d)
    return (lo + hi) / 2.0


def _gauss_newton_step(xs, ys, ws, a, rate, sse_full):
    # guarded single step: keep it only if it helps and stays in-domain
    decay = np.exp(-rate * xs)
    g = 1.0 - decay
    resid = ys - a * g
    jac = np.column_stack([g, a * xs * decay])
    normal = jac.T @ (ws[:, None] * jac)
    rhs = jac.T @ (ws * resid)
    try:
        step = np.linalg.solve(normal, rhs)
    except np.linalg.LinAlgError:
        return a, rate
    a2, r2 = a + float(step[0]), rate + float(step[1])
    if r2 > 0 and math.isfinite(a2) and math.isfinite(r2):
        if sse_full(a2, r2) <= sse_full(a, rate):
            return a2, r2
    return a, rate


def fit_exponential(points, metric_kind: str = "time_ms", setting=None) -> ExponentialPPC:
    """Weighted least squares for d'(x) = alpha * (1 - exp(-beta x)).

    points: iterable of (x, d_prime, weight).  Requires >= 3 distinct x
    and an overall increasing trend; data flat at a positive level fit
    with beta at the top of the search bracket and are flagged saturated.
    """
    pts = [(float(x), float(y), float(w)) for x, y, w in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    ws = np.array([p[2] for p in pts])
    if np.unique(xs).size < 3:
        raise ValueError("need at least 3 distinct x values")
    if np.any(xs < 0):
        raise ValueError("metric values must be non-negative")
    if np.any(ws <= 0):
        raise ValueError("weights must be positive")
    if float(ys.max()) <= 0.0:
        raise ValueError("no saturating trend: d' never rises above zero")
    xm = float(np.average(xs, weights=ws))
    ym = float(np.average(ys, weights=ws))
    if float(np.average((xs - xm) * (ys - ym), weights=ws)) < 0.0:
        raise ValueError("no saturating trend: d' decreases with the metric")
    alpha, beta, saturated = _profiled_rate_fit(xs, ys, ws)
    if alpha <= 0:
        raise ValueError("no saturating trend: fitted asymptote is not positive")
    return ExponentialPPC(
        alpha=alpha, beta=beta, metric_kind=metric_kind, setting=setting, saturated=saturated
    )


def lambda_for_time_ppc(fa_rates) -> float:
    """Shared criterion for the time channel: -probit(mean false-alarm rate)."""
    rates = [float(r) for r in fa_rates]
    if not rates:
        raise ValueError("need at least one false-alarm rate")
    for r in rates:
        if not 0.0 < r < 1.0:
            raise ValueError(f"false-alarm rate {r} outside (0, 1)")
    return -probit(sum(rates) / len(rates))


def lambda_for_eyemvmt_ppc(estimates) -> float:
    """Pool per-condition criterion estimates, weighting by 1/stderr."""
    est = [(float(lam), float(se)) for lam, se in estimates]
    if not est:
        raise ValueError("need at least one criterion estimate")
    if any(se <= 0 for _, se in est):
        raise ValueError("stderr must be positive")
    wsum = sum(1.0 / se for _, se in est)
    return sum(lam / se for lam, se in est) / wsum


def build_pc_curve(
    dp: ExponentialPPC,
    lambda_: float,
    weights: PriorWeights,
    binned_pc=(),
    sigma_floor: float = SIGMA_FLOOR,
) -> PCCurve:
    """Assemble a PC curve from a fitted d' curve plus binned empirical PC.

    binned_pc: (x, pc_mean, pc_stderr) triples sorted by x; only the
    stderr column feeds the uncertainty profile.  Without bins the
    profile degenerates to the constant floor.
    """
    knots = [(float(x), float(se)) for x, _, se in binned_pc]
    if any(b[0] <= a[0] for a, b in zip(knots, knots[1:])):
        raise ValueError("binned_pc must be sorted by strictly increasing x")
    if any(se <= 0 for _, se in knots):
        raise ValueError("pc_stderr must be positive")
    return PCCurve(
        dprime_curve=dp,
        lambda_=float(lambda_),
        weights=weights,
        sigma_knots_x=tuple(x for x, _ in knots),
        sigma_knots_y=tuple(se for _, se in knots),
        sigma_floor=sigma_floor,
    )


def fit_detectability_ppc(trials, bins: int = DEFAULT_BINS, setting=None,
                          sigma_floor: float = SIGMA_FLOOR) -> DetectabilityPPC:
    """Equal-count binning by d_score, then weighted LS of the pinned form.

    trials: (d_score, correct) pairs.  Empirical PC per bin gets the
    half-count correction at 0 or 1; pc_inf is capped at the value a
    perfect bin can reach, and hitting the cap sets ceiling_clamped.
    """
    data = [(float(d), bool(c)) for d, c in trials]
    if bins < 2:
        raise ValueError("need at least 2 bins")
    if len(data) < 2 * bins:
        raise ValueError(f"need at least {2 * bins} trials for {bins} bins")
    d = np.array([t[0] for t in data])
    y = np.array([1.0 if t[1] else 0.0 for t in data])
    if np.any(d < 0):
        raise ValueError("d_score must be non-negative")
    if np.unique(d).size < 2:
        raise ValueError("all d_scores identical")
    order = np.argsort(d, kind="stable")
    bx, bpc, bw = [], [], []
    for chunk in np.array_split(order, bins):
        nb = len(chunk)
        pc = float(y[chunk].mean())
        if pc <= 0.0:
            pc = 1.0 / (2 * nb)
        elif pc >= 1.0:
            pc = 1.0 - 1.0 / (2 * nb)
        se = max(math.sqrt(pc * (1.0 - pc) / nb), 1e-6)
        bx.append(float(d[chunk].mean()))
        bpc.append(pc)
        bw.append(1.0 / (se * se))
    xs = np.array(bx)
    ys = np.array(bpc) - 0.5
    ws = np.array(bw)
    amp, gamma, saturated = _profiled_rate_fit(xs, ys, ws)
    if amp <= 0:
        raise ValueError("accuracy does not increase with d_score")
    n_per_bin = len(data) // bins
    ceiling = 1.0 - 1.0 / (2 * n_per_bin)
    pc_inf = 0.5 + amp
    clamped = pc_inf >= ceiling - 1e-12
    if clamped:
        pc_inf = ceiling
    sigmas = tuple(1.0 / math.sqrt(w) for w in bw)
    return DetectabilityPPC(
        pc_inf=pc_inf,
        gamma=gamma,
        setting=setting,
        ceiling_clamped=clamped or saturated,
        sigma_knots_x=tuple(bx),
        sigma_knots_y=sigmas,
        sigma_floor=sigma_floor,
    )


def fit_log_eccentricity(points, time_condition_ms: float | None = None) -> LogEccentricityCurve:
    """Least-squares d'(e) = alpha_e + beta_e * ln(e) on eccentricities >= 1 degree."""
    pts = [(float(e), float(y)) for e, y in points]
    if any(e < 1.0 for e, _ in pts):
        raise ValueError("eccentricities below 1 degree are not measurable here")
    if len({e for e, _ in pts}) < 2:
        raise ValueError("need at least 2 distinct eccentricities")
    le = np.log([e for e, _ in pts])
    dy = np.array([y for _, y in pts])
    beta_e, alpha_e = np.polyfit(le, dy, 1)
    return LogEccentricityCurve(
        alpha_e=float(alpha_e), beta_e=float(beta_e), time_condition_ms=time_condition_ms
    )
