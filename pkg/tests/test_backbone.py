import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import backbonemc as bm


def sinusoid(freq_hz: float, dt: float, duration: float, amp: float = 0.01):
    t = np.arange(0.0, duration + dt / 2, dt)
    x = amp * np.sin(2 * math.pi * freq_hz * t)
    v = amp * 2 * math.pi * freq_hz * np.cos(2 * math.pi * freq_hz * t)
    return bm.TimeSeries(dt=dt, t0=0.0, x=x, v=v)


def test_pure_sinusoid_peak_count_amplitude_spacing():
    ts = sinusoid(5.0, 1e-3, 2.0)
    peaks = bm.pick_peaks(ts, 1e-4)
    assert len(peaks) == 10
    heights = np.array([p.a for p in peaks])
    assert np.allclose(heights, 0.01, rtol=1e-3)
    spacing = np.diff([p.t for p in peaks])
    assert np.allclose(spacing, 0.2, rtol=1e-3)


def test_zero_series_is_insufficient_decay():
    ts = bm.TimeSeries(dt=1e-3, t0=0.0, x=np.zeros(1000), v=np.zeros(1000))
    with pytest.raises(bm.InsufficientDecayError):
        bm.pick_peaks(ts, 1e-6)


def test_damped_linear_envelope():
    dt = 1e-4
    t = np.arange(0.0, 5.0, dt)
    x = np.exp(-0.4 * t) * np.cos(80.62 * t)
    ts = bm.TimeSeries(dt=dt, t0=0.0, x=x, v=np.gradient(x, dt))
    peaks = bm.pick_peaks(ts, 1e-2)
    for p in peaks:
        assert p.a == pytest.approx(math.exp(-0.4 * p.t), rel=5e-3)


def test_backbone_linear_damped_flat():
    spec = bm.ModelSpec.cubic_stiffness(k1=6500.0, k2=0.0, c1=0.8)
    ts = bm.integrate_free_decay(spec, bm.State(0.02, 0.0))
    curve = bm.extract_backbone(ts, 2e-4)
    # oracle: damped frequency omega_n * sqrt(1 - zeta^2) ~= 12.8305 Hz
    zeta = 0.8 / (2.0 * math.sqrt(6500.0))
    f_d = math.sqrt(6500.0) * math.sqrt(1 - zeta**2) / (2 * math.pi)
    assert f_d == pytest.approx(12.8305, rel=1e-3)
    assert np.allclose(curve.frequency_hz, f_d, rtol=1e-3)


def test_backbone_case1_hardening_monotone_smoothed():
    spec = bm.ModelSpec.cubic_stiffness(k1=6500.0, k2=6.5e6, c1=0.8)
    ts = bm.integrate_free_decay(spec, bm.State(0.02, 0.0))
    curve = bm.extract_backbone(ts, 2e-4)
    kernel = np.ones(5) / 5.0
    smooth = np.convolve(curve.frequency_hz, kernel, mode="valid")
    # decay order means amplitude decreasing, so frequency must not increase
    assert np.all(np.diff(smooth) <= 1e-9 * smooth[:-1])


def test_backbone_case1_harmonic_balance_oracle_spot():
    spec = bm.ModelSpec.cubic_stiffness(k1=6500.0, k2=6.5e6, c1=0.8)
    ts = bm.integrate_free_decay(spec, bm.State(0.02, 0.0))
    curve = bm.extract_backbone(ts, 2e-4)
    a = 0.01
    oracle = math.sqrt(6500.0 + 0.75 * 6.5e6 * a**2) / (2 * math.pi)
    assert oracle == pytest.approx(13.304, abs=5e-4)
    assert curve.frequency_at(a) == pytest.approx(oracle, rel=0.02)


def test_backbone_cantilever_softening_monotone_smoothed():
    spec = bm.ModelSpec.cantilever_magnet(KL=82.59, kn=9.16e9, c=0.07098, m=0.03842)
    ts = bm.integrate_free_decay(spec, bm.State(1e-5, 0.0))
    curve = bm.extract_backbone(ts, 1e-6)
    kernel = np.ones(5) / 5.0
    smooth = np.convolve(curve.frequency_hz, kernel, mode="valid")
    # softening: frequency rises as the decay proceeds toward small amplitude
    assert np.all(np.diff(smooth) >= -1e-9 * smooth[:-1])


def test_frequency_at_linear_interpolation_and_range():
    curve = bm.BackboneCurve(amplitude=np.array([0.01, 0.02]),
                             frequency_hz=np.array([13.0, 14.0]))
    assert curve.frequency_at(0.015) == pytest.approx(13.5)
    assert curve.frequency_at(0.05) is None
    assert curve.frequency_at(0.001) is None


def test_frequency_at_single_point_curve():
    curve = bm.BackboneCurve(amplitude=np.array([0.01]), frequency_hz=np.array([13.0]))
    assert curve.frequency_at(0.01) == pytest.approx(13.0)
    assert curve.frequency_at(0.011) is None


def test_extract_length_is_peak_count_minus_one():
    spec = bm.ModelSpec.cubic_stiffness(k1=6500.0, k2=6.5e6, c1=0.8)
    ts = bm.integrate_free_decay(spec, bm.State(0.02, 0.0))
    peaks = bm.pick_peaks(ts, 2e-4)
    curve = bm.extract_backbone(ts, 2e-4)
    assert len(curve) == len(peaks) - 1


def test_parabolic_refinement_stays_within_half_step():
    ts = sinusoid(7.37, 1.3e-3, 3.0)  # incommensurate with the grid
    peaks = bm.pick_peaks(ts, 1e-4)
    # independent oracle: raw sample-grid maxima
    x = ts.x
    idx = np.nonzero((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:]) & (x[1:-1] > 1e-4))[0] + 1
    assert len(idx) == len(peaks)
    for i, p in zip(idx, peaks):
        assert abs(p.t - i * ts.dt) <= ts.dt / 2 + 1e-15


@settings(max_examples=25, deadline=None)
@given(
    freq=st.floats(min_value=2.0, max_value=40.0),
    cycles_per_step=st.integers(min_value=40, max_value=400),
)
def test_sinusoid_frequency_recovery_property(freq, cycles_per_step):
    dt = 1.0 / (freq * cycles_per_step)
    ts = sinusoid(freq, dt, 6.0 / freq)
    curve = bm.extract_backbone(ts, 1e-4)
    assert np.allclose(curve.frequency_hz, freq, rtol=2.0 * dt * freq)


def test_backbone_curve_sorted_by_decreasing_amplitude():
    curve = bm.BackboneCurve(amplitude=np.array([0.01, 0.03, 0.02]),
                             frequency_hz=np.array([13.0, 15.0, 14.0]))
    assert np.all(np.diff(curve.amplitude) <= 0)
    assert list(curve.frequency_hz) == [15.0, 14.0, 13.0]


def test_backbone_curve_validation():
    with pytest.raises(bm.ConfigError):
        bm.BackboneCurve(amplitude=np.array([0.0, 0.01]),
                         frequency_hz=np.array([13.0, 14.0]))
    with pytest.raises(bm.ConfigError):
        bm.BackboneCurve(amplitude=np.array([0.01, 0.02]),
                         frequency_hz=np.array([13.0, -14.0]))
    with pytest.raises(bm.ConfigError):
        bm.BackboneCurve(amplitude=np.array([]), frequency_hz=np.array([]))


def test_backbone_csv_round_trip():
    spec = bm.ModelSpec.cubic_stiffness(k1=6500.0, k2=6.5e6, c1=0.8)
    settings_ = bm.ExtractionSettings(x0=0.02)
    curve = bm.simulate_backbone(spec, settings_)
    again = bm.BackboneCurve.from_csv(curve.to_csv())
    assert np.array_equal(again.amplitude, curve.amplitude)
    assert np.array_equal(again.frequency_hz, curve.frequency_hz)


def test_simulate_backbone_auto_threshold():
    spec = bm.ModelSpec.cubic_stiffness(k1=6500.0, k2=6.5e6, c1=0.8)
    curve = bm.simulate_backbone(spec, bm.ExtractionSettings(x0=0.02))
    # automatic cutoff: no point below 1% of the largest excursion
    assert curve.amplitude.min() >= 0.01 * 0.02 * 0.9


def test_extraction_settings_validation():
    with pytest.raises(bm.ConfigError):
        bm.ExtractionSettings(x0=0.02, dt_factor=4)
    with pytest.raises(bm.ConfigError):
        bm.ExtractionSettings(x0=0.02, t_end_factor=0.0)
