import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import backbonemc as bm
from conftest import BEAM_DAMPING, BEAM_KL, BEAM_KN, BEAM_MASS, CASE1_TRUE_BOUNDS


def test_uniform_bounds_from_moments_reported_stiffness_row():
    lo, hi = bm.uniform_bounds_from_moments(6500.0, 288.68)
    assert lo == pytest.approx(6000.0, abs=0.01)
    assert hi == pytest.approx(7000.0, abs=0.01)


def test_uniform_bounds_from_moments_degenerate():
    assert bm.uniform_bounds_from_moments(5.0, 0.0) == (5.0, 5.0)


def test_uniform_bounds_from_moments_damping_row():
    lo, hi = bm.uniform_bounds_from_moments(1.1, 0.52)
    # oracle: 1.1 -+ 0.52*sqrt(3)
    assert lo == pytest.approx(1.1 - 0.52 * math.sqrt(3.0), rel=1e-12)
    assert (round(lo, 3), round(hi, 3)) == (0.199, 2.001)


def test_uniform_bounds_negative_sd_rejected():
    with pytest.raises(bm.ConfigError):
        bm.uniform_bounds_from_moments(1.0, -0.1)


@settings(max_examples=50, deadline=None)
@given(mean=st.floats(-1e6, 1e6), sd=st.floats(0.0, 1e5))
def test_uniform_bounds_round_trip_moments(mean, sd):
    lo, hi = bm.uniform_bounds_from_moments(mean, sd)
    assert (lo + hi) / 2.0 == pytest.approx(mean, rel=1e-9, abs=1e-9)
    assert (hi - lo) / math.sqrt(12.0) == pytest.approx(sd, rel=1e-9, abs=1e-9)


def test_true_distribution_validation():
    with pytest.raises(bm.ConfigError):
        bm.TrueDistribution.from_bounds({"k1": (7000.0, 6000.0)})
    # degenerate bounds are allowed (fixed parameter)
    bm.TrueDistribution.from_bounds({"k1": (6500.0, 6500.0)})


def test_generate_measurements_reproducible(case1_template, case1_settings):
    dist = bm.TrueDistribution.from_bounds(CASE1_TRUE_BOUNDS)
    a = bm.generate_measurements(case1_template, dist, 5, case1_settings, seed=9)
    b = bm.generate_measurements(case1_template, dist, 5, case1_settings, seed=9)
    assert len(a) == len(b) == 5
    for ca, cb in zip(a.curves, b.curves):
        assert np.array_equal(ca.amplitude, cb.amplitude)
        assert np.array_equal(ca.frequency_hz, cb.frequency_hz)
    c = bm.generate_measurements(case1_template, dist, 5, case1_settings, seed=10)
    assert not np.array_equal(a.params, c.params)


def test_generate_measurements_degenerate_bounds_identical_curves(
    case1_template, case1_settings
):
    dist = bm.TrueDistribution.from_bounds(
        {"k1": (6500.0, 6500.0), "k2": (6.25e6, 6.25e6), "c1": (1.1, 1.1)}
    )
    mset = bm.generate_measurements(case1_template, dist, 3, case1_settings, seed=1)
    for c in mset.curves[1:]:
        assert np.array_equal(c.amplitude, mset.curves[0].amplitude)
        assert np.array_equal(c.frequency_hz, mset.curves[0].frequency_hz)


def test_generate_measurements_count_minimum(case1_template, case1_settings):
    dist = bm.TrueDistribution.from_bounds(CASE1_TRUE_BOUNDS)
    with pytest.raises(bm.ConfigError):
        bm.generate_measurements(case1_template, dist, 1, case1_settings, seed=1)


def test_draw_moments_converge_at_1000():
    dist = bm.TrueDistribution.from_bounds(CASE1_TRUE_BOUNDS)
    draws = bm.draw_parameters(dist, 1000, seed=49)
    for j, name in enumerate(dist.names):
        lo, hi = CASE1_TRUE_BOUNDS[name]
        mean = (lo + hi) / 2.0
        sd = (hi - lo) / math.sqrt(12.0)
        assert draws[:, j].mean() == pytest.approx(mean, rel=0.01)
        assert draws[:, j].std(ddof=1) == pytest.approx(sd, rel=0.01)


def test_ensemble_parameter_means_within_5_percent(case1_mset):
    means = case1_mset.params.mean(axis=0)
    for value, name in zip(means, case1_mset.param_names):
        lo, hi = CASE1_TRUE_BOUNDS[name]
        assert value == pytest.approx((lo + hi) / 2.0, rel=0.05)


def test_generated_curves_satisfy_backbone_invariants(case1_mset):
    for curve in case1_mset.curves:
        assert np.all(curve.amplitude > 0)
        assert np.all(np.isfinite(curve.frequency_hz))
        assert np.all(np.diff(curve.amplitude) <= 0)


def test_case1_curves_all_hardening(case1_mset):
    kernel = np.ones(5) / 5.0
    for curve in case1_mset.curves:
        smooth = np.convolve(curve.frequency_hz, kernel, mode="valid")
        assert np.all(np.diff(smooth) <= 1e-9 * smooth[:-1])


def test_injected_beam_samples_band(beam_mset):
    # nine curves from the measured stiffness pairs span roughly 6.4 to 8.1 Hz
    assert len(beam_mset) == 9
    f_min = min(c.frequency_hz.min() for c in beam_mset.curves)
    f_max = max(c.frequency_hz.max() for c in beam_mset.curves)
    assert 6.2 < f_min < 6.5
    assert 7.9 < f_max < 8.2


def test_generate_from_params_validation(beam_template, beam_settings):
    with pytest.raises(bm.ConfigError):
        bm.generate_from_params(beam_template, ("KL", "kn"),
                                np.array([[80.0, 1e9]]), beam_settings)
    with pytest.raises(bm.ConfigError):
        bm.generate_from_params(beam_template, ("KL",),
                                np.array([[80.0, 1e9], [90.0, 2e9]]), beam_settings)


def test_diverging_member_error_names_the_draw(beam_settings):
    template = bm.ModelSpec.cantilever_magnet(KL=80.0, kn=1e9, c=BEAM_DAMPING,
                                              m=BEAM_MASS)
    params = np.array([[80.0, 1e7], [80.0, 1e25]])  # second member blows up
    with pytest.raises(bm.DivergenceError, match="member 1"):
        bm.generate_from_params(template, ("KL", "kn"), params, beam_settings)


def test_save_load_round_trip(tmp_path, beam_mset):
    bm.save_measurements(beam_mset, tmp_path / "meas")
    loaded = bm.load_measurements(tmp_path / "meas")
    assert len(loaded) == len(beam_mset)
    for a, b in zip(loaded.curves, beam_mset.curves):
        assert np.array_equal(a.amplitude, b.amplitude)
        assert np.array_equal(a.frequency_hz, b.frequency_hz)
    assert loaded.provenance["kind"] == "file"
    assert loaded.param_names == ("KL", "kn")
    assert np.allclose(loaded.params, np.column_stack([BEAM_KL, BEAM_KN]))


def test_load_measurements_empty_directory(tmp_path):
    with pytest.raises(bm.ConfigError, match="manifest"):
        bm.load_measurements(tmp_path)


def test_load_externally_measured_curves_without_manifest(tmp_path, beam_mset):
    # bare backbone CSVs, as they would arrive from an external measurement
    for i, curve in enumerate(beam_mset.curves[:3]):
        (tmp_path / f"run_{i}.csv").write_text(curve.to_csv())
    loaded = bm.load_measurements(tmp_path)
    assert len(loaded) == 3
    assert loaded.provenance["kind"] == "file"
    assert loaded.params is None


def test_common_amplitude_range(beam_mset):
    lo, hi = beam_mset.common_amplitude_range()
    assert 0 < lo < hi
    for c in beam_mset.curves:
        c_lo, c_hi = c.amplitude_range
        assert c_lo <= lo and hi <= c_hi
