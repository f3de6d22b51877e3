"""Detectability surfaces built from forced-fixation eccentricity curves.

A log-eccentricity curve d'(e) = alpha_e + beta_e * ln(e) measured at a
handful of fixation durations is revolved around each fixation point to
give a per-pixel d' field.  Fields from successive fixations add
pixel-wise (L1 composition), the spatial mean of the composite is the
trial's running detectability score, and the composite also drives the
exploration map shown during the move-on interlude.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import ndimage

DEFAULT_WIDTH_PX = 1024
DEFAULT_HEIGHT_PX = 760
DEFAULT_DEG_PER_PX = 0.022

PGM_MAXVAL = 65535


@dataclass(frozen=True)
class GridGeometry:
    """Pixel grid of the stimulus plus its angular subtense."""

    width_px: int = DEFAULT_WIDTH_PX
    height_px: int = DEFAULT_HEIGHT_PX
    deg_per_px: float = DEFAULT_DEG_PER_PX

    def __post_init__(self):
        if self.width_px < 1 or self.height_px < 1:
            raise ValueError("grid extent must be at least 1x1 px")
        if not self.deg_per_px > 0:
            raise ValueError("deg_per_px must be positive")

    @property
    def n_pixels(self) -> int:
        return self.width_px * self.height_px

    def decimated(self, factor: int) -> "GridGeometry":
        """Coarser grid covering the same field of view."""
        if factor < 1:
            raise ValueError("decimation factor must be >= 1")
        return GridGeometry(
            width_px=max(1, self.width_px // factor),
            height_px=max(1, self.height_px // factor),
            deg_per_px=self.deg_per_px * factor,
        )


@dataclass(frozen=True)
class LogEccentricityCurve:
    """d'(e) = alpha_e + beta_e * ln(e), eccentricity clamped below 1 degree."""

    alpha_e: float
    beta_e: float
    time_condition_ms: float | None = None

    def d_prime(self, ecc_deg):
        e = np.maximum(np.asarray(ecc_deg, dtype=float), 1.0)
        return self.alpha_e + self.beta_e * np.log(e)


@dataclass(frozen=True)
class CurveFamily:
    """Per-setting eccentricity curves across fixation-duration conditions.

    Keys are Setting objects (any hashable works); values are curves
    ordered by strictly increasing time condition.  Between conditions
    the (alpha_e, beta_e) pair is interpolated linearly in ln(duration),
    which is equivalent to interpolating d' itself at every eccentricity;
    outside the measured range the nearest condition applies.
    """

    curves: dict = field(default_factory=dict)

    def __post_init__(self):
        for key, cs in self.curves.items():
            if not cs:
                raise ValueError(f"empty curve list for {key}")
            times = [c.time_condition_ms for c in cs]
            if any(t is None for t in times):
                raise ValueError(f"curve without time condition for {key}")
            if any(b >= a for a, b in zip(times[1:], times[:-1])):
                raise ValueError(f"time conditions not strictly increasing for {key}")

    def curves_for(self, setting):
        try:
            return self.curves[setting]
        except KeyError:
            raise ValueError(f"no eccentricity curves for setting {setting!r}") from None

    def interp_params(self, setting, duration_ms: float) -> tuple[float, float]:
        """(alpha_e, beta_e) at the given fixation duration, clamped to the measured range."""
        cs = self.curves_for(setting)
        if not duration_ms > 0:
            raise ValueError("duration must be positive")
        if len(cs) == 1:
            return cs[0].alpha_e, cs[0].beta_e
        lt = np.log([c.time_condition_ms for c in cs])
        q = math.log(duration_ms)
        alpha = float(np.interp(q, lt, [c.alpha_e for c in cs]))
        beta = float(np.interp(q, lt, [c.beta_e for c in cs]))
        return alpha, beta


@dataclass(frozen=True)
class Fixation:
    """One fixation: image position in px and dwell time in ms."""

    position_px: tuple[float, float]
    duration_ms: float

    def __post_init__(self):
        if not self.duration_ms > 0:
            raise ValueError("fixation duration must be positive")


def _validated_field(geometry: GridGeometry, values, lo=0.0, hi=None):
    arr = np.asarray(values, dtype=float)
    if arr.shape != (geometry.height_px, geometry.width_px):
        raise ValueError(
            f"field shape {arr.shape} does not match geometry "
            f"{(geometry.height_px, geometry.width_px)}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("field contains non-finite values")
    if arr.size and float(arr.min()) < lo:
        raise ValueError(f"field values must be >= {lo}")
    if hi is not None and arr.size and float(arr.max()) > hi:
        raise ValueError(f"field values must be <= {hi}")
    return arr


@dataclass(frozen=True)
class SurfaceGrid:
    """Dense non-negative d' field over the stimulus grid."""

    geometry: GridGeometry
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _validated_field(self.geometry, self.values))


@dataclass(frozen=True)
class ClutterMap:
    """Dense map in [0,1]; also the carrier for the exploration map."""

    geometry: GridGeometry
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "values", _validated_field(self.geometry, self.values, lo=0.0, hi=1.0)
        )


@lru_cache(maxsize=4)
def _log_ecc_master(width_px: int, height_px: int, deg_per_px: float) -> np.ndarray:
    """ln(eccentricity) of every pixel offset, precomputed once per geometry.

    Shape (2H-1, 2W-1): entry [H-1+dy, W-1+dx] holds ln(max(1 deg, r*deg_per_px))
    for the offset (dx, dy).  A fixation surface is then a plain slice of this
    grid, so per-fixation cost is one multiply-add over the frame.
    """
    dy = np.arange(-(height_px - 1), height_px, dtype=float)
    dx = np.arange(-(width_px - 1), width_px, dtype=float)
    r = np.sqrt(dy[:, None] ** 2 + dx[None, :] ** 2) * deg_per_px
    np.maximum(r, 1.0, out=r)
    np.log(r, out=r)
    return r


def single_fixation_surface(
    f: Fixation, family: CurveFamily, setting, geom: GridGeometry
) -> SurfaceGrid:
    """Revolve the duration-interpolated eccentricity curve around one fixation.

    Fixation positions are quantized to the nearest pixel; negative d'
    from the log fit at large eccentricity is floored at zero.
    """
    alpha, beta = family.interp_params(setting, f.duration_ms)
    ix = int(round(f.position_px[0]))
    iy = int(round(f.position_px[1]))
    if not (0 <= ix < geom.width_px and 0 <= iy < geom.height_px):
        raise ValueError(f"fixation at {f.position_px} outside {geom.width_px}x{geom.height_px} grid")
    master = _log_ecc_master(geom.width_px, geom.height_px, geom.deg_per_px)
    h, w = geom.height_px, geom.width_px
    window = master[h - 1 - iy : 2 * h - 1 - iy, w - 1 - ix : 2 * w - 1 - ix]
    vals = alpha + beta * window
    np.maximum(vals, 0.0, out=vals)
    return SurfaceGrid(geom, vals)


def compose(surfaces, geometry: GridGeometry | None = None) -> SurfaceGrid:
    """Pixel-wise L1 sum in list order; empty input gives a zero surface."""
    surfaces = list(surfaces)
    if not surfaces:
        geom = geometry if geometry is not None else GridGeometry()
        return SurfaceGrid(geom, np.zeros((geom.height_px, geom.width_px)))
    geom = surfaces[0].geometry
    for s in surfaces[1:]:
        if s.geometry != geom:
            raise ValueError("cannot compose surfaces with mismatched geometries")
    if geometry is not None and geometry != geom:
        raise ValueError("explicit geometry does not match surface geometry")
    total = surfaces[0].values.copy()
    for s in surfaces[1:]:
        total += s.values
    return SurfaceGrid(geom, total)


def d_score(s: SurfaceGrid) -> float:
    """Spatial mean of the surface: the composite detectability score."""
    return float(np.mean(s.values))


def exploration_map(fc: ClutterMap, s: SurfaceGrid) -> ClutterMap:
    """Clutter gated by what has already been covered: fc * (1 - s / max(s))."""
    if fc.geometry != s.geometry:
        raise ValueError("clutter map and surface geometries differ")
    peak = float(s.values.max()) if s.values.size else 0.0
    if peak > 0:
        remaining = 1.0 - s.values / peak
    else:
        remaining = np.ones_like(s.values)
    out = fc.values * remaining
    np.clip(out, 0.0, 1.0, out=out)
    return ClutterMap(fc.geometry, out)


def clutter_proxy(
    image, geometry: GridGeometry | None = None, window_px: int = 31
) -> ClutterMap:
    """Local luminance variability as a cheap stand-in for a dense clutter map.

    Sliding-window standard deviation (reflect-padded), min-max normalized.
    Accepts a 2D grayscale or HxWx3 RGB array.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim == 3:
        img = img[..., 0] * 0.299 + img[..., 1] * 0.587 + img[..., 2] * 0.114
    if img.ndim != 2:
        raise ValueError("expected a 2D grayscale or HxWx3 image")
    if geometry is None:
        geometry = GridGeometry(
            width_px=img.shape[1], height_px=img.shape[0], deg_per_px=DEFAULT_DEG_PER_PX
        )
    elif img.shape != (geometry.height_px, geometry.width_px):
        raise ValueError("image dimensions do not match geometry")
    mean = ndimage.uniform_filter(img, size=window_px, mode="reflect")
    meansq = ndimage.uniform_filter(img * img, size=window_px, mode="reflect")
    var = np.maximum(meansq - mean * mean, 0.0)
    std = np.sqrt(var)
    lo, hi = float(std.min()), float(std.max())
    if hi > lo:
        std = (std - lo) / (hi - lo)
    else:
        std = np.zeros_like(std)
    return ClutterMap(geometry, std)


def write_graymap(path, grid, max_value: float | None = None) -> None:
    """Export a surface or map as 16-bit binary PGM plus a JSON sidecar.

    Values are scaled so that max_value maps to 65535; by default
    max_value is the field's own maximum (1.0 for an all-zero field).
    The sidecar records geometry and the scale needed to recover values.
    """
    path = Path(path)
    vals = grid.values
    if max_value is None:
        peak = float(vals.max()) if vals.size else 0.0
        max_value = peak if peak > 0 else 1.0
    if not max_value > 0:
        raise ValueError("max_value must be positive")
    q = np.clip(np.round(vals / max_value * PGM_MAXVAL), 0, PGM_MAXVAL)
    q = q.astype(">u2")
    geom = grid.geometry
    with open(path, "wb") as fh:
        fh.write(f"P5\n{geom.width_px} {geom.height_px}\n{PGM_MAXVAL}\n".encode("ascii"))
        fh.write(q.tobytes())
    sidecar = {
        "width_px": geom.width_px,
        "height_px": geom.height_px,
        "deg_per_px": geom.deg_per_px,
        "max_value": max_value,
        "kind": type(grid).__name__,
    }
    with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_graymap(path):
    """Read a graymap written by write_graymap; returns (SurfaceGrid-or-ClutterMap, sidecar)."""
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens = []
    i = 0
    while len(tokens) < 4:
        while i < len(raw) and raw[i : i + 1].isspace():
            i += 1
        if raw[i : i + 1] == b"#":
            while i < len(raw) and raw[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(raw) and not raw[j : j + 1].isspace():
            j += 1
        tokens.append(raw[i:j])
        i = j
    i += 1
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM file")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != PGM_MAXVAL:
        raise ValueError(f"expected 16-bit graymap (maxval {PGM_MAXVAL}), got {maxval}")
    data = np.frombuffer(raw[i:], dtype=">u2", count=width * height)
    with open(path.with_suffix(path.suffix + ".json")) as fh:
        sidecar = json.load(fh)
    geom = GridGeometry(
        width_px=sidecar["width_px"],
        height_px=sidecar["height_px"],
        deg_per_px=sidecar["deg_per_px"],
    )
    vals = data.reshape(height, width).astype(float) * (sidecar["max_value"] / PGM_MAXVAL)
    cls = ClutterMap if sidecar.get("kind") == "ClutterMap" else SurfaceGrid
    if cls is ClutterMap:
        vals = np.clip(vals, 0.0, 1.0)
    return cls(geom, vals), sidecar
