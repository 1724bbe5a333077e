"""Shared fixtures: the calibrated study setups used across the test modules.

Everything is seeded, so every fixture is deterministic; the expensive
measurement ensembles and MCMC chains are session-scoped.
"""

from __future__ import annotations

import numpy as np
import pytest

import backbonemc as bm

# Cubic-stiffness study (hardening oscillator, m = 1 kg)
CASE1_TRUE_BOUNDS = {
    "k1": (6000.0, 7000.0),
    "k2": (6.0e6, 6.5e6),
    "c1": (0.2, 2.0),
}
CASE1_PRIOR_BOUNDS = {
    "k1": (5399.0, 7701.0),  # wide prior from reported mean 6550 / sd 664.56
    "k2": (6.0e6, 6.5e6),
    "c1": (0.2, 2.0),
}
CASE1_ENSEMBLE_SEED = 42
CASE1_CHAIN_SEED = 7

# Hysteretic (Bouc-Wen) study; bounds derived from mean/sd via sd*sqrt(3)
CASE4_TRUE_MOMENTS = {
    "A": (1.25, 0.43),
    "alpha": (0.65, 0.09),
    "beta": (1.5, 0.29),
    "gamma": (1.5, 0.29),
}

# Cantilever-with-magnets study: the nine measured stiffness pairs
BEAM_KL = [82.59, 79.00, 71.58, 67.28, 62.91, 78.34, 90.35, 95.33, 97.87]
BEAM_KN = [9.16e9, 16.30e9, 25.60e9, 38.10e9, 49.30e9, 15.86e9, 5.72e9, 0.75e9, 0.05e9]
BEAM_MASS = 0.03842
BEAM_DAMPING = 0.07098
BEAM_GRID_LEVELS = [2.0e-6, 3.5e-6, 6.5e-6]
BEAM_PRIOR_BOUNDS = {"KL": (55.0, 105.0), "kn": (0.0, 55.0e9)}
BEAM_CHAIN_SEEDS = [101, 102, 103, 104]


@pytest.fixture(scope="session")
def case1_template():
    return bm.ModelSpec.cubic_stiffness(k1=6500.0, k2=6.25e6, c1=1.1)


@pytest.fixture(scope="session")
def case1_settings():
    return bm.ExtractionSettings(x0=0.02)


@pytest.fixture(scope="session")
def case1_mset(case1_template, case1_settings):
    dist = bm.TrueDistribution.from_bounds(CASE1_TRUE_BOUNDS)
    return bm.generate_measurements(case1_template, dist, 50, case1_settings,
                                    seed=CASE1_ENSEMBLE_SEED)


@pytest.fixture(scope="session")
def case1_model_uniform(case1_mset, case1_template, case1_settings):
    return bm.build_likelihood(case1_mset, case1_template, case1_settings,
                               kind="uniform")


@pytest.fixture(scope="session")
def case1_model_kde(case1_mset, case1_template, case1_settings):
    return bm.build_likelihood(case1_mset, case1_template, case1_settings, kind="kde")


@pytest.fixture(scope="session")
def case1_prior():
    return bm.PriorSpec.from_bounds(CASE1_PRIOR_BOUNDS)


@pytest.fixture(scope="session")
def beam_template():
    return bm.ModelSpec.cantilever_magnet(KL=80.0, kn=10.0e9, c=BEAM_DAMPING,
                                          m=BEAM_MASS)


@pytest.fixture(scope="session")
def beam_settings():
    return bm.ExtractionSettings(x0=1.0e-5)


@pytest.fixture(scope="session")
def beam_mset(beam_template, beam_settings):
    params = np.column_stack([BEAM_KL, BEAM_KN])
    return bm.generate_from_params(beam_template, ("KL", "kn"), params, beam_settings)


@pytest.fixture(scope="session")
def beam_model(beam_mset, beam_template, beam_settings):
    grid = bm.AmplitudeGrid(np.array(BEAM_GRID_LEVELS))
    return bm.build_likelihood(beam_mset, beam_template, beam_settings, grid=grid,
                               kind="uniform")


@pytest.fixture(scope="session")
def beam_chains(beam_model):
    """Four 20000-iteration chains on the cantilever study (shared by the
    experimental-case and convergence acceptance tests)."""
    prior = bm.PriorSpec.from_bounds(BEAM_PRIOR_BOUNDS)
    proposal = bm.ProposalSpec.from_prior(prior, 0.3)
    target = bm.PosteriorTarget(beam_model, prior.names)
    return bm.run_chains(target, prior, proposal, 20000, seeds=BEAM_CHAIN_SEEDS,
                         workers=2)
