import math
import pickle

import numpy as np
import pytest
from scipy.stats import genextreme

import backbonemc as bm
from backbonemc.likelihood import GevFit, UniformFit, fit_slice


def test_amplitude_grid_validation():
    with pytest.raises(bm.ConfigError):
        bm.AmplitudeGrid(np.array([0.01]))
    with pytest.raises(bm.ConfigError):
        bm.AmplitudeGrid(np.array([0.02, 0.01]))
    with pytest.raises(bm.ConfigError):
        bm.AmplitudeGrid(np.array([-0.01, 0.02]))


def test_grid_from_quantiles_inside_every_curve(case1_mset):
    grid = bm.AmplitudeGrid.from_quantiles(case1_mset)
    lo, hi = case1_mset.common_amplitude_range()
    assert np.all(grid.levels > lo) and np.all(grid.levels < hi)
    for curve in case1_mset.curves:
        assert not np.isnan(curve.frequencies_at(grid.levels)).any()


def test_slice_identical_curves_duplicated_frequencies():
    curve = bm.BackboneCurve(amplitude=np.array([0.03, 0.02, 0.01]),
                             frequency_hz=np.array([14.0, 13.5, 13.0]))
    twin = bm.BackboneCurve(amplitude=curve.amplitude.copy(),
                            frequency_hz=curve.frequency_hz.copy())
    mset = bm.MeasurementSet([curve, twin], {"kind": "synthetic"})
    grid = bm.AmplitudeGrid(np.array([0.015, 0.025]))
    samples = bm.slice_frequencies(mset, grid)
    for s in samples:
        assert s.size == 2
        assert s[0] == s[1]


def test_slice_level_above_support_is_coverage_error(case1_mset):
    grid = bm.AmplitudeGrid(np.array([0.01, 1.0]))
    with pytest.raises(bm.GridCoverageError):
        bm.slice_frequencies(case1_mset, grid)


def test_uniform_fit_is_min_max():
    dens = fit_slice(np.array([7.0, 6.4, 8.0]), "uniform", level=0.01)
    assert (dens.params.a, dens.params.b) == (6.4, 8.0)
    assert dens.support == (6.4, 8.0)


def test_uniform_fit_degenerate_sample_rejected():
    with pytest.raises(bm.FitError):
        fit_slice(np.array([7.0, 7.0, 7.0]), "uniform")


def test_kde_degenerate_sample_uses_bandwidth_floor():
    dens = fit_slice(np.array([7.0, 7.0, 7.0, 7.0]), "kde")
    assert dens.params.bandwidth == pytest.approx(1e-4 * 7.0)
    # density is maximal at the repeated value
    assert dens.logpdf(7.0) > dens.logpdf(7.0 + 1e-3)
    assert dens.logpdf(7.0) > dens.logpdf(7.0 - 1e-3)


def test_kde_integrates_to_one_and_positive():
    rng = np.random.default_rng(5)
    dens = fit_slice(rng.normal(13.0, 0.3, size=25), "kde")
    x = np.linspace(dens.support[0], dens.support[1], 20001)
    y = np.exp([dens.logpdf(v) for v in x])
    assert np.all(y > 0)
    assert np.trapezoid(y, x) == pytest.approx(1.0, abs=1e-6)


def test_kde_silverman_bandwidth_value():
    rng = np.random.default_rng(11)
    samples = np.sort(rng.normal(13.0, 0.3, size=40))
    dens = fit_slice(samples, "kde")
    sd = samples.std(ddof=1)
    iqr = np.percentile(samples, 75) - np.percentile(samples, 25)
    expected = 0.9 * min(sd, iqr / 1.34) * 40 ** (-0.2)
    assert dens.params.bandwidth == pytest.approx(expected, rel=1e-12)


def test_gev_round_trip_recovers_parameters():
    # oracle generator: scipy's genextreme with c = -k
    k, sigma, mu = 0.292, 0.085, 1.635
    samples = genextreme.rvs(-k, loc=mu, scale=sigma, size=5000,
                             random_state=np.random.default_rng(12))
    dens = fit_slice(samples, "gev")
    assert dens.params.k == pytest.approx(k, rel=0.10)
    assert dens.params.sigma == pytest.approx(sigma, rel=0.10)
    assert dens.params.mu == pytest.approx(mu, rel=0.10)


def test_gev_logpdf_matches_scipy_convention():
    fit = GevFit(k=0.292, sigma=0.085, mu=1.635)
    dens = bm.SliceDensity(level=0.01, kind="gev", params=fit,
                           support=(fit.mu - fit.sigma / fit.k, math.inf))
    for x in [1.6, 1.635, 1.8, 2.5]:
        expected = genextreme.logpdf(x, -fit.k, loc=fit.mu, scale=fit.sigma)
        assert dens.logpdf(x) == pytest.approx(expected, rel=1e-9)
    # outside the lower endpoint the density is zero
    assert dens.logpdf(1.0) == -math.inf


def test_gev_fit_requires_eight_samples():
    with pytest.raises(bm.FitError):
        fit_slice(np.linspace(6.0, 8.0, 7), "gev")


def test_fit_slice_needs_two_samples():
    with pytest.raises(bm.FitError):
        fit_slice(np.array([7.0]), "uniform")


def test_unknown_density_kind():
    with pytest.raises(bm.ConfigError):
        fit_slice(np.array([6.0, 7.0]), "cauchy")


def test_uniform_log_likelihood_algebra():
    # three levels, each Uniform(6.4, 8.0): per-level cost is -log(1.6)
    dens = [
        bm.SliceDensity(level=a, kind="uniform", params=UniformFit(6.4, 8.0),
                        support=(6.4, 8.0))
        for a in (0.01, 0.02, 0.03)
    ]
    total = sum(d.logpdf(7.0) for d in dens)
    assert dens[0].logpdf(6.4) == pytest.approx(-0.4700, abs=5e-5)
    assert total == pytest.approx(-1.4100, abs=2e-4)
    assert dens[0].logpdf(8.5) == -math.inf


def test_beam_model_uniform_log_likelihood_exact(beam_model):
    # inside the support every uniform level contributes exactly -log(b - a)
    expected = -sum(math.log(d.params.b - d.params.a) for d in beam_model.densities)
    ll = beam_model.log_likelihood({"KL": 80.0, "kn": 10.0e9})
    assert ll == pytest.approx(expected, rel=1e-12)


def test_beam_model_out_of_support_is_minus_inf(beam_model):
    # a stiff, linear candidate sits near 8.6 Hz, above every slice's support
    assert beam_model.log_likelihood({"KL": 104.0, "kn": 0.01e9}) == -math.inf


def test_candidate_not_reaching_levels_is_minus_inf(case1_model_uniform):
    # nearly undamped: the decay cannot reach the lowest grid level within the
    # integration horizon, so the candidate must be rejected, not extrapolated
    ll = case1_model_uniform.log_likelihood({"k1": 6500.0, "k2": 6.25e6, "c1": 0.01})
    assert ll == -math.inf


def test_central_candidate_beats_prior_corner(case1_model_kde):
    central = case1_model_kde.log_likelihood({"k1": 6500.0, "k2": 6.25e6, "c1": 1.1})
    corner = case1_model_kde.log_likelihood({"k1": 7700.0, "k2": 6.7e6, "c1": 2.9})
    assert central >= corner


def test_log_likelihood_deterministic_bitwise(case1_model_kde):
    theta = {"k1": 6437.0, "k2": 6.21e6, "c1": 0.9}
    assert case1_model_kde.log_likelihood(theta) == case1_model_kde.log_likelihood(theta)


def test_permuting_curves_leaves_densities_unchanged(case1_mset, case1_template,
                                                     case1_settings):
    grid = bm.AmplitudeGrid.from_quantiles(case1_mset)
    shuffled = bm.MeasurementSet(list(reversed(case1_mset.curves)),
                                 case1_mset.provenance)
    a = bm.build_likelihood(case1_mset, case1_template, case1_settings, grid=grid,
                            kind="kde")
    b = bm.build_likelihood(shuffled, case1_template, case1_settings, grid=grid,
                            kind="kde")
    for da, db in zip(a.densities, b.densities):
        assert da.params.bandwidth == db.params.bandwidth
        assert np.array_equal(da.params.samples, db.params.samples)
    theta = {"k1": 6500.0, "k2": 6.25e6, "c1": 1.1}
    assert a.log_likelihood(theta) == b.log_likelihood(theta)


def test_uniform_support_monotone_under_superset(case1_mset, case1_template,
                                                 case1_settings):
    grid = bm.AmplitudeGrid.from_quantiles(case1_mset)
    subset = bm.MeasurementSet(case1_mset.curves[:20], {"kind": "synthetic"})
    small = bm.build_likelihood(subset, case1_template, case1_settings, grid=grid,
                                kind="uniform")
    big = bm.build_likelihood(case1_mset, case1_template, case1_settings, grid=grid,
                              kind="uniform")
    rng = np.random.default_rng(8)
    for _ in range(5):
        theta = {
            "k1": rng.uniform(6100, 6900),
            "k2": rng.uniform(6.05e6, 6.45e6),
            "c1": rng.uniform(0.3, 1.9),
        }
        if small.log_likelihood(theta) > -math.inf:
            assert big.log_likelihood(theta) > -math.inf


def test_likelihood_model_serialization_round_trip(tmp_path, case1_model_kde,
                                                   beam_model):
    for model in (case1_model_kde, beam_model):
        path = tmp_path / "model.json"
        model.save(path)
        loaded = bm.LikelihoodModel.load(path)
        assert loaded.to_dict() == model.to_dict()
        theta = (
            {"k1": 6500.0, "k2": 6.25e6, "c1": 1.1}
            if model is case1_model_kde
            else {"KL": 80.0, "kn": 10.0e9}
        )
        assert loaded.log_likelihood(theta) == model.log_likelihood(theta)


def test_posterior_target_picklable(beam_model):
    target = bm.PosteriorTarget(beam_model, ("KL", "kn"))
    clone = pickle.loads(pickle.dumps(target))
    theta = np.array([80.0, 10.0e9])
    assert clone(theta) == target(theta)


def test_densities_must_match_grid(case1_model_kde):
    with pytest.raises(bm.ConfigError):
        bm.LikelihoodModel(
            grid=case1_model_kde.grid,
            densities=case1_model_kde.densities[:-1],
            template=case1_model_kde.template,
            settings=case1_model_kde.settings,
        )


def test_build_likelihood_needs_two_curves(case1_mset, case1_template, case1_settings):
    single = bm.MeasurementSet(case1_mset.curves[:1], {"kind": "synthetic"})
    with pytest.raises(bm.ConfigError):
        bm.build_likelihood(single, case1_template, case1_settings)
