"""Stochastic nonlinear model updating from backbone curves.

Pipeline: simulate nonlinear oscillator free decays, extract backbone curves by
resonant decay + peak picking, build an amplitude-sliced joint likelihood from a
measurement ensemble, sample the posterior with Metropolis-Hastings, and report
convergence diagnostics, posterior summaries and per-level distribution fits.
"""

from .backbone import (
    BackboneCurve,
    ExtractionSettings,
    Peak,
    extract_backbone,
    pick_peaks,
    simulate_backbone,
)
from .diagnostics import (
    GevFit,
    ParamSummary,
    SliceComparison,
    SummaryStats,
    UniformFit,
    compare_slices,
    gelman_rubin,
    posterior_predictive,
    summarize,
    thin_draws,
)
from .dynamics import (
    BeamProperties,
    ModelKind,
    ModelSpec,
    ParameterVector,
    State,
    TimeSeries,
    boucwen_zdot,
    galerkin_constants,
    integrate_free_decay,
    restoring_force,
    stiffness_from_frequency,
)
from .ensemble import (
    MeasurementSet,
    TrueDistribution,
    draw_parameters,
    generate_from_params,
    generate_measurements,
    load_measurements,
    save_measurements,
    uniform_bounds_from_moments,
)
from .errors import (
    BackboneMcError,
    ConfigError,
    DegenerateChainError,
    DivergenceError,
    FitError,
    GridCoverageError,
    InitializationError,
    InsufficientDecayError,
)
from .likelihood import (
    AmplitudeGrid,
    LikelihoodModel,
    PosteriorTarget,
    SliceDensity,
    build_likelihood,
    fit_slice,
    log_likelihood,
    slice_frequencies,
)
from .sampler import (
    Chain,
    PriorSpec,
    ProposalSpec,
    acceptance_rate,
    load_chains,
    log_prior,
    mh_run,
    run_chains,
    save_chains,
    tune_proposal,
)

__version__ = "0.1.0"
