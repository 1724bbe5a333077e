"""Convergence diagnostics, posterior summaries and per-level distribution
comparisons between measured and posterior-predictive backbone ensembles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backbone import simulate_backbone
from .ensemble import MeasurementSet
from .errors import ConfigError, DegenerateChainError
from .likelihood import (
    AmplitudeGrid,
    GevFit,
    LikelihoodModel,
    SliceDensity,
    UniformFit,
    fit_slice,
    slice_frequencies,
)
from .sampler import Chain

__all__ = [
    "ParamSummary",
    "SummaryStats",
    "SliceComparison",
    "GevFit",
    "UniformFit",
    "gelman_rubin",
    "summarize",
    "thin_draws",
    "posterior_predictive",
    "compare_slices",
]


@dataclass(frozen=True)
class ParamSummary:
    mean: float
    sd: float
    ci: tuple[float, float]


@dataclass(frozen=True)
class SummaryStats:
    """Per-parameter posterior mean, sample sd and percentile credible interval."""

    confidence: float
    params: dict[str, ParamSummary]


def _as_chain_list(chains) -> list[Chain]:
    if isinstance(chains, Chain):
        return [chains]
    chains = list(chains)
    if not chains:
        raise ConfigError("need at least one chain")
    names = chains[0].names
    if any(c.names != names for c in chains):
        raise ConfigError("all chains must share the same parameter names")
    return chains


def gelman_rubin(chains, parameter: int | str, split: bool = False) -> float:
    """Potential scale reduction factor R-hat for one parameter.

    W is the mean within-chain sample variance and B/n the sample variance of
    the chain means; R-hat = sqrt(((n-1)/n * W + B/n) / W) over the chains'
    post-burn-in samples (equal lengths required). ``split=True`` halves each
    chain first, which also flags non-stationarity within single chains.
    """
    chains = _as_chain_list(chains)
    if len(chains) < 2:
        raise ConfigError("Gelman-Rubin needs >= 2 chains")
    j = chains[0].parameter_index(parameter)
    series = [np.asarray(c.post_burn_in[:, j], dtype=np.float64) for c in chains]
    if split:
        halved = []
        for s in series:
            half = s.size // 2
            halved.extend([s[:half], s[half: 2 * half]])
        series = halved
    n = series[0].size
    if any(s.size != n for s in series):
        raise ConfigError("chains must have equal post-burn-in lengths")
    if n < 10:
        raise ConfigError("need >= 10 post-burn-in samples per chain")
    within = np.array([np.var(s, ddof=1) for s in series])
    W = float(within.mean())
    if W == 0.0:
        raise DegenerateChainError(
            f"within-chain variance is zero for parameter {parameter!r}"
        )
    means = np.array([s.mean() for s in series])
    B_over_n = float(np.var(means, ddof=1))
    return math.sqrt(((n - 1.0) / n * W + B_over_n) / W)


def summarize(chains, confidence: float = 0.95) -> SummaryStats:
    """Pooled post-burn-in mean, sample sd and percentile credible interval per
    parameter. Pooling concatenates chains, so the result is order-invariant."""
    chains = _as_chain_list(chains)
    if not 0 < confidence < 1:
        raise ConfigError("confidence must lie in (0, 1)")
    pooled = np.concatenate([c.post_burn_in for c in chains], axis=0)
    if pooled.shape[0] < 100:
        raise ConfigError("need >= 100 pooled post-burn-in samples")
    tail = 100.0 * (1.0 - confidence) / 2.0
    params: dict[str, ParamSummary] = {}
    for j, name in enumerate(chains[0].names):
        # sorting fixes the summation order, so results are bitwise independent
        # of the order in which chains were concatenated
        col = np.sort(pooled[:, j])
        mean = float(col.mean())
        sd = float(col.std(ddof=1))
        lo, hi = (float(v) for v in np.percentile(col, [tail, 100.0 - tail]))
        slack = 1e-12 * (abs(mean) + (hi - lo))  # absorb summation rounding
        if not lo - slack <= mean <= hi + slack:
            raise ConfigError(
                f"percentile interval ({lo:.6g}, {hi:.6g}) does not bracket the "
                f"mean {mean:.6g} for {name!r}; samples look pathologically skewed"
            )
        params[name] = ParamSummary(mean=mean, sd=sd, ci=(lo, hi))
    return SummaryStats(confidence=confidence, params=params)


def thin_draws(chains, count: int = 100) -> np.ndarray:
    """Evenly strided parameter draws from the pooled post-burn-in samples."""
    chains = _as_chain_list(chains)
    pooled = np.concatenate([c.post_burn_in for c in chains], axis=0)
    if count < 1 or pooled.shape[0] < count:
        raise ConfigError(f"cannot thin {pooled.shape[0]} samples down to {count}")
    stride = pooled.shape[0] // count
    return pooled[::stride][:count].copy()


def posterior_predictive(model: LikelihoodModel, chains,
                         count: int = 100) -> MeasurementSet:
    """Backbone curves simulated at ``count`` thinned posterior draws, using the
    same template and extraction settings as the measurement processing."""
    chains = _as_chain_list(chains)
    draws = thin_draws(chains, count)
    names = chains[0].names
    curves = [
        simulate_backbone(
            model.template.with_params({n: float(v) for n, v in zip(names, row)}),
            model.settings,
            meta={"draw": i},
        )
        for i, row in enumerate(draws)
    ]
    provenance = {
        "kind": "synthetic",
        "method": "posterior_predictive",
        "count": int(count),
    }
    return MeasurementSet(curves, provenance, params=draws, param_names=tuple(names))


@dataclass(frozen=True)
class SliceComparison:
    level: float
    measured: SliceDensity
    predicted: SliceDensity


def compare_slices(
    measured: MeasurementSet,
    predicted: MeasurementSet,
    grid: AmplitudeGrid,
    kind: str,
) -> list[SliceComparison]:
    """Fit the chosen density per amplitude level on both ensembles, pairing the
    measured fit with the (posterior-) predicted one for side-by-side tables."""
    measured_samples = slice_frequencies(measured, grid)
    predicted_samples = slice_frequencies(predicted, grid)
    out = []
    for level, fm, fp in zip(grid.levels, measured_samples, predicted_samples):
        out.append(
            SliceComparison(
                level=float(level),
                measured=fit_slice(fm, kind, level=float(level)),
                predicted=fit_slice(fp, kind, level=float(level)),
            )
        )
    return out
