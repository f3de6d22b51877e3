"""CSV ingestion, synthetic generation, and the end-to-end fit pipeline."""

import math

import pytest

from aaad.datagen import (
    ChannelTruth,
    ECC_DEGREES,
    EYE_CONDITIONS,
    TIME_CONDITIONS_MS,
    default_truths,
    generate_eccentricity_csv,
    generate_psychometric_csv,
)
from aaad.dataset import (
    DatasetError,
    EccRecord,
    FitOptions,
    PsychRecord,
    fit_bundle,
    fit_bundle_from_csv,
    read_eccentricity_csv,
    read_psychometric_csv,
)
from aaad.ppc import Setting

MAIN_HEADER = ("setting_zoom,setting_clutter,target,metric_kind,"
               "metric_value,target_present,response_present\n")
ECC_HEADER = ("setting_zoom,setting_clutter,target,time_condition_ms,"
              "ecc_deg,target_present,response_present\n")

S = Setting("high", "low", "weapon")


def test_read_psychometric_parses_fields():
    text = MAIN_HEADER + (
        "high,low,weapon,time_ms,800.0,1,1\n"
        "medium,high,person,eye_movements,4,0,1\n"
        "low,low,weapon,d_score,2.5,1,0\n"
    )
    records = read_psychometric_csv(text)
    assert len(records) == 3
    assert records[0] == PsychRecord(S, "time_ms", 800.0, True, True)
    assert records[1].setting == Setting("medium", "high", "person")
    assert records[1].metric_value == 4.0
    assert records[1].target_present is False and records[1].response_present is True
    assert records[2].metric_kind == "d_score"


def test_read_eccentricity_parses_fields():
    text = ECC_HEADER + "high,low,weapon,400,2.0,1,0\n"
    (rec,) = read_eccentricity_csv(text)
    assert rec == EccRecord(S, 400.0, 2.0, True, False)


@pytest.mark.parametrize("header,reader", [
    (MAIN_HEADER, read_psychometric_csv),
    (ECC_HEADER, read_eccentricity_csv),
])
def test_missing_column_is_named(header, reader):
    broken = header.replace("target_present,", "")
    broken_rows = broken + "x" * 8 + "\n"
    with pytest.raises(DatasetError, match="missing column 'target_present'"):
        reader(broken_rows)


def test_unknown_column_is_named():
    text = MAIN_HEADER.rstrip() + ",observer_id\n" + "high,low,weapon,time_ms,1,1,1,77\n"
    with pytest.raises(DatasetError, match="unknown column 'observer_id'"):
        read_psychometric_csv(text)


def test_boolean_columns_are_strict():
    text = MAIN_HEADER + "high,low,weapon,time_ms,800,yes,1\n"
    with pytest.raises(DatasetError, match="row 2: target_present must be 0 or 1"):
        read_psychometric_csv(text)
    text = MAIN_HEADER + ("high,low,weapon,time_ms,800,1,1\n"
                          "high,low,weapon,time_ms,800,1,true\n")
    with pytest.raises(DatasetError, match="row 3: response_present"):
        read_psychometric_csv(text)


def test_bad_metric_kind_and_value():
    with pytest.raises(DatasetError, match="row 2: unknown metric_kind 'rt_ms'"):
        read_psychometric_csv(MAIN_HEADER + "high,low,weapon,rt_ms,800,1,1\n")
    with pytest.raises(DatasetError, match="not a number"):
        read_psychometric_csv(MAIN_HEADER + "high,low,weapon,time_ms,fast,1,1\n")
    with pytest.raises(DatasetError, match="must be >= 0"):
        read_psychometric_csv(MAIN_HEADER + "high,low,weapon,time_ms,-5,1,1\n")
    with pytest.raises(DatasetError, match="must be >= 0"):
        read_psychometric_csv(MAIN_HEADER + "high,low,weapon,time_ms,nan,1,1\n")


def test_bad_setting_levels_name_the_row():
    with pytest.raises(DatasetError, match="row 2"):
        read_psychometric_csv(MAIN_HEADER + "ultra,low,weapon,time_ms,800,1,1\n")


def test_eccentricity_bounds():
    with pytest.raises(DatasetError, match="time_condition_ms must be positive"):
        read_eccentricity_csv(ECC_HEADER + "high,low,weapon,0,2,1,1\n")
    with pytest.raises(DatasetError, match="ecc_deg must be >= 1"):
        read_eccentricity_csv(ECC_HEADER + "high,low,weapon,400,0.5,1,1\n")


def test_empty_datasets_rejected():
    with pytest.raises(DatasetError, match="dataset has no rows"):
        read_psychometric_csv(MAIN_HEADER)
    with pytest.raises(DatasetError, match="eccentricity dataset has no rows"):
        read_eccentricity_csv(ECC_HEADER)


# --- synthetic generation ---


def test_generation_is_deterministic():
    a = generate_psychometric_csv(seed=11)
    b = generate_psychometric_csv(seed=11)
    assert a == b
    assert a != generate_psychometric_csv(seed=12)
    ea = generate_eccentricity_csv(seed=11)
    assert ea == generate_eccentricity_csv(seed=11)
    assert ea != generate_eccentricity_csv(seed=12)


def test_generated_shapes():
    truths = {S: ChannelTruth()}
    main = read_psychometric_csv(generate_psychometric_csv(truths, n_per_condition=40,
                                                           n_detect=100, seed=3))
    n_rate = 40 * (len(TIME_CONDITIONS_MS) + len(EYE_CONDITIONS))
    assert len(main) == n_rate + 100
    assert {r.setting for r in main} == {S}
    times = sorted({r.metric_value for r in main if r.metric_kind == "time_ms"})
    assert tuple(times) == TIME_CONDITIONS_MS
    ecc = read_eccentricity_csv(generate_eccentricity_csv(truths, n_per_cell=8, seed=3))
    truth = truths[S]
    assert len(ecc) == 8 * len(truth.ecc_params) * len(ECC_DEGREES)
    assert {r.time_condition_ms for r in ecc} == {c for c, _, _ in truth.ecc_params}


def test_generation_rejects_tiny_sizes():
    with pytest.raises(ValueError, match="too small"):
        generate_psychometric_csv(n_per_condition=2)
    with pytest.raises(ValueError, match="too small"):
        generate_eccentricity_csv(n_per_cell=2)


# --- end-to-end fit recovery ---


@pytest.fixture(scope="module")
def fitted():
    truths = default_truths()
    bundle = fit_bundle_from_csv(generate_psychometric_csv(truths, seed=7),
                                 generate_eccentricity_csv(truths, seed=7))
    return truths, bundle


def test_fit_recovers_rate_channels(fitted):
    truths, bundle = fitted
    for setting, truth in truths.items():
        m = bundle.model_for(setting)
        assert m.time_curve.dprime_curve.alpha == pytest.approx(truth.time_alpha, abs=0.2)
        assert m.time_curve.dprime_curve.beta == pytest.approx(truth.time_beta, rel=0.25)
        assert m.time_curve.lambda_ == pytest.approx(truth.time_lambda, abs=0.05)
        assert m.eyemvmt_curve.dprime_curve.alpha == pytest.approx(truth.eye_alpha,
                                                                   abs=0.2)
        assert m.eyemvmt_curve.dprime_curve.beta == pytest.approx(truth.eye_beta,
                                                                  rel=0.25)
        assert m.eyemvmt_curve.lambda_ == pytest.approx(truth.eye_lambda, abs=0.05)


def test_fit_recovers_detectability(fitted):
    truths, bundle = fitted
    for setting, truth in truths.items():
        det = bundle.model_for(setting).detect_ppc
        assert det.pc_inf == pytest.approx(truth.det_pc_inf, abs=0.02)
        assert det.gamma == pytest.approx(truth.det_gamma, rel=0.3)


def test_fit_recovers_eccentricity_family(fitted):
    truths, bundle = fitted
    for setting, truth in truths.items():
        curves = bundle.model_for(setting).ecc_curves
        assert [c.time_condition_ms for c in curves] == [c for c, _, _ in truth.ecc_params]
        for curve, (_, alpha_e, beta_e) in zip(curves, truth.ecc_params):
            assert curve.alpha_e == pytest.approx(alpha_e, abs=0.3)
            assert curve.beta_e == pytest.approx(beta_e, abs=0.15)


def test_fit_thresholds_track_difficulty(fitted):
    truths, bundle = fitted
    for setting in truths:
        th = bundle.thresholds_for(setting)
        assert math.isfinite(th.t_star_ms) and th.t_star_ms > 0
        assert math.isfinite(th.e_star) and th.e_star > 0
        assert math.isfinite(th.d_star) and th.d_star > 0
    # slower d' growth in time must push the time criterion later
    fast = bundle.thresholds_for(Setting("high", "low", "weapon"))
    slow = bundle.thresholds_for(Setting("medium", "medium", "weapon"))
    assert slow.t_star_ms > fast.t_star_ms
    assert slow.e_star > fast.e_star


def test_fit_options_thread_through(fitted):
    truths, _ = fitted
    main = generate_psychometric_csv(truths, seed=7)
    ecc = generate_eccentricity_csv(truths, seed=7)
    opts = FitOptions(epsilon=0.1, eta=0.2, sigma_floor=0.02)
    bundle = fit_bundle_from_csv(main, ecc, opts)
    assert bundle.satisfaction.epsilon == 0.1
    assert bundle.satisfaction.eta == 0.2
    model = bundle.model_for(S)
    assert model.time_curve.sigma_floor == 0.02
    assert model.detect_ppc.sigma_floor == 0.02
    # looser epsilon means an earlier time criterion
    strict = fit_bundle_from_csv(main, ecc, FitOptions(epsilon=0.005))
    assert bundle.thresholds_for(S).t_star_ms < strict.thresholds_for(S).t_star_ms


def test_fit_bundle_roundtrips_through_document(fitted):
    _, bundle = fitted
    from aaad.bundle import ModelBundle

    doc = bundle.to_document()
    again = ModelBundle.from_document(doc)
    assert again.to_document() == doc


def _rate_rows(kind, value, n=40):
    rows = []
    for i in range(n):
        present = i < n // 2
        rows.append(PsychRecord(S, kind, value, present, present))
    return rows


def _ecc_rows():
    rows = []
    for ecc in (1.0, 2.0, 4.0):
        for i in range(40):
            rows.append(EccRecord(S, 200.0, ecc, i < 20, (i < 20) == (i % 4 != 0)))
    return rows


def test_fit_errors_name_setting_and_channel():
    base = (_rate_rows("time_ms", 200.0) + _rate_rows("time_ms", 800.0)
            + _rate_rows("time_ms", 2400.0))
    eyes = sum((_rate_rows("eye_movements", v) for v in (1.0, 4.0, 12.0)), [])
    dets = _rate_rows("d_score", 1.0) + _rate_rows("d_score", 3.0)
    with pytest.raises(DatasetError, match="setting high-low-weapon: no eye_movements rows"):
        fit_bundle(base + dets, _ecc_rows())
    with pytest.raises(DatasetError, match="setting high-low-weapon: no eccentricity data"):
        fit_bundle(base + eyes + dets, [])
    # degenerate slice fails inside the channel fit and keeps its context
    degenerate = _rate_rows("time_ms", 500.0) + eyes + dets
    with pytest.raises(DatasetError, match="setting high-low-weapon, time channel"):
        fit_bundle(degenerate, _ecc_rows())


def test_generated_csv_fits_per_setting_context():
    # drop one channel from an otherwise healthy two-setting dataset
    truths = default_truths()
    records = read_psychometric_csv(generate_psychometric_csv(truths, n_per_condition=24,
                                                              n_detect=60, seed=5))
    other = Setting("medium", "medium", "weapon")
    pruned = [r for r in records
              if not (r.setting == other and r.metric_kind == "d_score")]
    eccs = read_eccentricity_csv(generate_eccentricity_csv(truths, n_per_cell=8, seed=5))
    with pytest.raises(DatasetError, match="setting medium-medium-weapon: no d_score rows"):
        fit_bundle(pruned, eccs)
