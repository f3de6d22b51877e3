"""Detectability surfaces: revolution, composition, reduction, maps, export."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aaad.ppc import Setting
from aaad.surface import (
    ClutterMap,
    CurveFamily,
    Fixation,
    GridGeometry,
    LogEccentricityCurve,
    SurfaceGrid,
    clutter_proxy,
    compose,
    d_score,
    exploration_map,
    read_graymap,
    single_fixation_surface,
    write_graymap,
)

FF_TIMES = (100.0, 200.0, 400.0, 900.0, 1600.0)
WEAPON = Setting("high", "medium", "weapon")

# small grid, 0.02 deg/px so that 50 px = 1 degree exactly
GEOM = GridGeometry(width_px=512, height_px=512, deg_per_px=0.02)


def flat_family(c, setting=WEAPON):
    curves = tuple(LogEccentricityCurve(c, 0.0, t) for t in FF_TIMES)
    return CurveFamily({setting: curves})


def log_family(alpha_e, beta_e, setting=WEAPON):
    curves = tuple(LogEccentricityCurve(alpha_e, beta_e, t) for t in FF_TIMES)
    return CurveFamily({setting: curves})


class TestGeometry:
    def test_defaults(self):
        g = GridGeometry()
        assert (g.width_px, g.height_px) == (1024, 760)
        assert g.deg_per_px == 0.022

    def test_validation(self):
        with pytest.raises(ValueError):
            GridGeometry(deg_per_px=0.0)
        with pytest.raises(ValueError):
            GridGeometry(width_px=0)

    def test_decimated_covers_same_field(self):
        g = GridGeometry(1024, 760, 0.022).decimated(4)
        assert (g.width_px, g.height_px) == (256, 190)
        assert g.deg_per_px == pytest.approx(0.088)


class TestCurveFamily:
    def test_times_must_increase(self):
        curves = (LogEccentricityCurve(1.0, 0.0, 400.0),
                  LogEccentricityCurve(1.0, 0.0, 200.0))
        with pytest.raises(ValueError):
            CurveFamily({WEAPON: curves})

    def test_missing_time_rejected(self):
        with pytest.raises(ValueError):
            CurveFamily({WEAPON: (LogEccentricityCurve(1.0, 0.0, None),)})

    def test_unknown_setting_rejected(self):
        fam = flat_family(1.0)
        with pytest.raises(ValueError):
            fam.curves_for(Setting("low", "low", "person"))

    def test_interpolation_hits_nodes(self):
        curves = tuple(LogEccentricityCurve(t / 1000.0, 0.0, t) for t in FF_TIMES)
        fam = CurveFamily({WEAPON: curves})
        for t in FF_TIMES:
            alpha, beta = fam.interp_params(WEAPON, t)
            assert alpha == pytest.approx(t / 1000.0, abs=1e-12)
            assert beta == 0.0

    def test_interpolation_linear_in_log_time(self):
        curves = (LogEccentricityCurve(1.0, -0.2, 100.0),
                  LogEccentricityCurve(3.0, -0.6, 400.0))
        fam = CurveFamily({WEAPON: curves})
        alpha, beta = fam.interp_params(WEAPON, 200.0)
        u = (math.log(200) - math.log(100)) / (math.log(400) - math.log(100))
        assert alpha == pytest.approx(1.0 + u * 2.0, abs=1e-12)
        assert beta == pytest.approx(-0.2 + u * -0.4, abs=1e-12)

    def test_clamped_outside_measured_range(self):
        fam = CurveFamily({WEAPON: (LogEccentricityCurve(1.0, -0.1, 100.0),
                                    LogEccentricityCurve(2.0, -0.3, 1600.0))})
        assert fam.interp_params(WEAPON, 10.0) == fam.interp_params(WEAPON, 100.0)
        assert fam.interp_params(WEAPON, 5000.0) == fam.interp_params(WEAPON, 1600.0)


class TestSingleFixationSurface:
    def test_flat_family_gives_uniform_surface(self):
        s = single_fixation_surface(Fixation((256.0, 256.0), 300.0), flat_family(1.5), WEAPON, GEOM)
        assert np.all(s.values == 1.5)
        assert d_score(s) == 1.5

    def test_log_curve_values_at_known_eccentricities(self):
        s = single_fixation_surface(Fixation((256.0, 256.0), 400.0),
                                    log_family(3.0, -1.0), WEAPON, GEOM)
        # 50 px right of fixation = 1 degree; 200 px = 4 degrees
        assert s.values[256, 306] == pytest.approx(3.0, abs=1e-12)
        assert s.values[256, 456] == pytest.approx(3.0 - math.log(4.0), abs=1e-12)
        assert s.values[256, 456] == pytest.approx(1.6137, abs=1e-4)

    def test_duration_at_measured_condition(self):
        curves = tuple(LogEccentricityCurve(t / 1000.0, 0.0, t) for t in FF_TIMES)
        fam = CurveFamily({WEAPON: curves})
        s = single_fixation_surface(Fixation((256.0, 256.0), 900.0), fam, WEAPON, GEOM)
        assert np.all(s.values == pytest.approx(0.9, abs=1e-12))

    def test_clamped_inside_one_degree(self):
        s = single_fixation_surface(Fixation((256.0, 256.0), 400.0),
                                    log_family(3.0, -1.0), WEAPON, GEOM)
        # every pixel within 1 degree (50 px) carries the 1-degree value
        for dx, dy in ((0, 0), (10, 0), (0, -30), (30, 40), (-35, -35)):
            assert math.hypot(dx, dy) <= 50.0
            assert s.values[256 + dy, 256 + dx] == pytest.approx(3.0, abs=1e-12)

    def test_negative_tail_floored_at_zero(self):
        s = single_fixation_surface(Fixation((256.0, 256.0), 400.0),
                                    log_family(0.5, -1.0), WEAPON, GEOM)
        assert float(s.values.min()) == 0.0
        # at 4 degrees the raw curve is 0.5 - ln 4 < 0
        far = s.values[256, 256 + 200]
        assert far == 0.0

    def test_radial_symmetry(self):
        s = single_fixation_surface(Fixation((200.0, 260.0), 250.0),
                                    log_family(2.0, -0.7), WEAPON, GEOM)
        for dx, dy in ((60, 25), (100, 0), (7, 90)):
            a = s.values[260 + dy, 200 + dx]
            assert a == s.values[260 - dy, 200 - dx]
            assert a == s.values[260 + dy, 200 - dx]
            assert a == s.values[260 - dy, 200 + dx]
            # swapping the axes keeps the radius too
            assert a == s.values[260 + dx, 200 + dy]

    def test_position_quantized_to_pixel(self):
        a = single_fixation_surface(Fixation((200.2, 260.4), 250.0),
                                    log_family(2.0, -0.7), WEAPON, GEOM)
        b = single_fixation_surface(Fixation((200.0, 260.0), 250.0),
                                    log_family(2.0, -0.7), WEAPON, GEOM)
        assert np.array_equal(a.values, b.values)

    def test_time_monotonicity(self):
        curves = tuple(LogEccentricityCurve(0.5 + t / 1000.0, -0.2, t) for t in FF_TIMES)
        fam = CurveFamily({WEAPON: curves})
        s_short = single_fixation_surface(Fixation((256.0, 256.0), 150.0), fam, WEAPON, GEOM)
        s_long = single_fixation_surface(Fixation((256.0, 256.0), 1200.0), fam, WEAPON, GEOM)
        assert np.all(s_long.values >= s_short.values)

    def test_out_of_bounds_fixation_rejected(self):
        with pytest.raises(ValueError):
            single_fixation_surface(Fixation((600.0, 100.0), 250.0),
                                    flat_family(1.0), WEAPON, GEOM)

    def test_setting_absent_from_family(self):
        with pytest.raises(ValueError):
            single_fixation_surface(Fixation((256.0, 256.0), 250.0),
                                    flat_family(1.0), Setting("low", "low", "person"), GEOM)

    def test_nonpositive_duration_rejected(self):
        with pytest.raises(ValueError):
            Fixation((10.0, 10.0), 0.0)


def random_surface(rng, geom):
    return SurfaceGrid(geom, rng.uniform(0.0, 3.0, (geom.height_px, geom.width_px)))


class TestCompose:
    def test_identity(self):
        g = GridGeometry(32, 24, 0.05)
        s = random_surface(np.random.default_rng(0), g)
        out = compose([s])
        assert np.array_equal(out.values, s.values)

    def test_double(self):
        g = GridGeometry(32, 24, 0.05)
        s = random_surface(np.random.default_rng(1), g)
        out = compose([s, s])
        assert np.array_equal(out.values, 2.0 * s.values)

    def test_pair_order_invariance_bitwise(self):
        g = GridGeometry(32, 24, 0.05)
        rng = np.random.default_rng(2)
        a, b = random_surface(rng, g), random_surface(rng, g)
        assert np.array_equal(compose([a, b]).values, compose([b, a]).values)

    def test_empty_gives_zero_surface(self):
        g = GridGeometry(16, 16, 0.1)
        out = compose([], geometry=g)
        assert out.geometry == g
        assert not np.any(out.values)

    def test_geometry_mismatch_rejected(self):
        a = random_surface(np.random.default_rng(3), GridGeometry(16, 16, 0.1))
        b = random_surface(np.random.default_rng(4), GridGeometry(16, 12, 0.1))
        with pytest.raises(ValueError):
            compose([a, b])


class TestDScore:
    def test_zero_surface(self):
        g = GridGeometry(16, 16, 0.1)
        assert d_score(compose([], geometry=g)) == 0.0

    def test_uniform_surface(self):
        g = GridGeometry(64, 64, 0.05)
        s = SurfaceGrid(g, np.full((64, 64), 1.5))
        assert d_score(s) == 1.5

    def test_half_and_half(self):
        g = GridGeometry(64, 64, 0.05)
        vals = np.zeros((64, 64))
        vals[:32, :] = 3.0
        assert d_score(SurfaceGrid(g, vals)) == 1.5

    def test_additive_under_composition(self):
        g = GridGeometry(48, 36, 0.05)
        rng = np.random.default_rng(9)
        a, b = random_surface(rng, g), random_surface(rng, g)
        assert d_score(compose([a, b])) == pytest.approx(d_score(a) + d_score(b), rel=1e-12)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_additivity_property(self, seed):
        g = GridGeometry(20, 15, 0.1)
        rng = np.random.default_rng(seed)
        a, b = random_surface(rng, g), random_surface(rng, g)
        assert d_score(compose([a, b])) == pytest.approx(d_score(a) + d_score(b), rel=1e-12)


class TestExplorationMap:
    def test_blank_surface_returns_clutter(self):
        g = GridGeometry(16, 16, 0.1)
        fc = ClutterMap(g, np.random.default_rng(0).uniform(0, 1, (16, 16)))
        out = exploration_map(fc, compose([], geometry=g))
        assert np.array_equal(out.values, fc.values)

    def test_uniform_surface_clears_map(self):
        g = GridGeometry(16, 16, 0.1)
        fc = ClutterMap(g, np.random.default_rng(1).uniform(0, 1, (16, 16)))
        s = SurfaceGrid(g, np.full((16, 16), 2.0))
        out = exploration_map(fc, s)
        assert not np.any(out.values)

    def test_minimum_at_fixation(self):
        fc = ClutterMap(GEOM, np.ones((512, 512)))
        s = single_fixation_surface(Fixation((256.0, 256.0), 400.0),
                                    log_family(3.0, -1.0), WEAPON, GEOM)
        out = exploration_map(fc, s)
        peak = float(s.values.max())
        expected = 1.0 - s.values / peak
        assert np.allclose(out.values, expected, atol=1e-12)
        assert out.values[256, 256] == float(out.values.min())

    def test_pointwise_below_clutter(self):
        g = GridGeometry(24, 24, 0.1)
        rng = np.random.default_rng(12)
        fc = ClutterMap(g, rng.uniform(0, 1, (24, 24)))
        s = SurfaceGrid(g, rng.uniform(0, 2, (24, 24)))
        out = exploration_map(fc, s)
        assert np.all(out.values <= fc.values + 1e-15)

    def test_geometry_mismatch_rejected(self):
        fc = ClutterMap(GridGeometry(16, 16, 0.1), np.ones((16, 16)))
        s = SurfaceGrid(GridGeometry(16, 12, 0.1), np.ones((12, 16)))
        with pytest.raises(ValueError):
            exploration_map(fc, s)


def brute_force_local_std(img, win):
    # scipy's "reflect" boundary duplicates the edge sample, numpy calls
    # that "symmetric"
    pad = win // 2
    padded = np.pad(img, pad, mode="symmetric")
    out = np.zeros_like(img, dtype=float)
    for i in range(img.shape[0]):
        for j in range(img.shape[1]):
            w = padded[i : i + win, j : j + win]
            out[i, j] = w.std()
    return out


class TestClutterProxy:
    def test_constant_image_all_zero(self):
        img = np.full((40, 60), 128.0)
        cm = clutter_proxy(img, window_px=11)
        assert not np.any(cm.values)

    def test_two_halves_band_at_boundary(self):
        img = np.zeros((40, 60))
        img[:, 30:] = 200.0
        cm = clutter_proxy(img, window_px=11)
        assert np.all(cm.values[:, :24] == 0.0)
        assert np.all(cm.values[:, 36:] == 0.0)
        assert float(cm.values[:, 28:32].min()) > 0.5

    def test_matches_windowed_stddev_oracle(self):
        rng = np.random.default_rng(77)
        img = rng.uniform(0, 255, (20, 20))
        expected = brute_force_local_std(img, 5)
        lo, hi = expected.min(), expected.max()
        expected = (expected - lo) / (hi - lo)
        cm = clutter_proxy(img, window_px=5)
        assert np.allclose(cm.values, expected, atol=1e-8)

    def test_white_noise_near_uniform(self):
        rng = np.random.default_rng(3)
        img = rng.uniform(0, 255, (80, 80))
        cm = clutter_proxy(img, window_px=15)
        inner = cm.values[20:-20, 20:-20]
        assert float(inner.mean()) > 0.3
        assert float(inner.std()) < 0.2

    def test_rgb_reduced_to_luminance(self):
        rng = np.random.default_rng(8)
        rgb = rng.uniform(0, 255, (16, 16, 3))
        gray = rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114
        assert np.allclose(clutter_proxy(rgb).values, clutter_proxy(gray).values)


class TestGraymapIO:
    def test_roundtrip_surface(self, tmp_path):
        s = single_fixation_surface(Fixation((256.0, 256.0), 400.0),
                                    log_family(3.0, -1.0), WEAPON, GEOM)
        p = tmp_path / "surf.pgm"
        write_graymap(p, s)
        back, sidecar = read_graymap(p)
        assert isinstance(back, SurfaceGrid)
        assert back.geometry == s.geometry
        quantum = sidecar["max_value"] / 65535
        assert np.allclose(back.values, s.values, atol=quantum / 2 + 1e-12)

    def test_roundtrip_clutter_map(self, tmp_path):
        g = GridGeometry(32, 20, 0.05)
        cm = ClutterMap(g, np.random.default_rng(4).uniform(0, 1, (20, 32)))
        p = tmp_path / "map.pgm"
        write_graymap(p, cm, max_value=1.0)
        back, sidecar = read_graymap(p)
        assert isinstance(back, ClutterMap)
        assert sidecar["max_value"] == 1.0
        assert np.allclose(back.values, cm.values, atol=1.0 / 65535)

    def test_zero_surface_roundtrip(self, tmp_path):
        g = GridGeometry(8, 8, 0.1)
        p = tmp_path / "zero.pgm"
        write_graymap(p, compose([], geometry=g))
        back, _ = read_graymap(p)
        assert not np.any(back.values)

    def test_header_is_binary_pgm(self, tmp_path):
        g = GridGeometry(8, 6, 0.1)
        p = tmp_path / "hdr.pgm"
        write_graymap(p, SurfaceGrid(g, np.ones((6, 8))))
        raw = p.read_bytes()
        assert raw.startswith(b"P5\n8 6\n65535\n")
        assert len(raw) == len(b"P5\n8 6\n65535\n") + 8 * 6 * 2


class TestFieldValidation:
    def test_negative_surface_rejected(self):
        g = GridGeometry(4, 4, 0.1)
        with pytest.raises(ValueError):
            SurfaceGrid(g, np.full((4, 4), -0.5))

    def test_nonfinite_rejected(self):
        g = GridGeometry(4, 4, 0.1)
        vals = np.ones((4, 4))
        vals[0, 0] = np.nan
        with pytest.raises(ValueError):
            SurfaceGrid(g, vals)

    def test_clutter_range_enforced(self):
        g = GridGeometry(4, 4, 0.1)
        with pytest.raises(ValueError):
            ClutterMap(g, np.full((4, 4), 1.5))

    def test_shape_mismatch_rejected(self):
        g = GridGeometry(4, 4, 0.1)
        with pytest.raises(ValueError):
            SurfaceGrid(g, np.ones((4, 5)))
