"""Amplitude-sliced likelihood built from an ensemble of backbone curves.

The measurement ensemble is sliced at fixed amplitude levels; the backbone
frequencies of all curves at one level form a sample to which a density is
fitted (Gaussian KDE, Uniform, or generalized extreme value). A candidate
parameter vector is scored by simulating its deterministic backbone, reading
one frequency per level, and summing the per-level log densities; the levels
are treated as independent, so the joint likelihood is the product of the
per-level densities. Candidates whose decay does not span every level are
rejected with log-likelihood -inf rather than extrapolated.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.special import gamma as gamma_fn

from ._io import atomic_write_text
from .backbone import (
    BackboneCurve,
    ExtractionSettings,
    auto_min_amplitude,
    extract_backbone,
)
from .dynamics import (
    ModelKind,
    ModelSpec,
    Param,
    ParameterVector,
    TimeSeries,
    _rk4_decay,
)
from .ensemble import MeasurementSet
from .errors import ConfigError, FitError, GridCoverageError, InsufficientDecayError

__all__ = [
    "AmplitudeGrid",
    "KdeParams",
    "UniformFit",
    "GevFit",
    "SliceDensity",
    "LikelihoodModel",
    "PosteriorTarget",
    "slice_frequencies",
    "fit_slice",
    "build_likelihood",
    "log_likelihood",
]

logger = logging.getLogger(__name__)

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# Fraction of the lowest grid level at which candidate decays may stop early:
# far enough below the level that interpolation is still bracketed, so results
# are identical to integrating the full horizon.
_CANDIDATE_STOP_FRACTION = 0.5


@dataclass(frozen=True)
class AmplitudeGrid:
    """Strictly increasing amplitude levels at which the ensemble is sliced."""

    levels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "levels", np.asarray(self.levels, dtype=np.float64))
        if self.levels.size < 2:
            raise ConfigError("an amplitude grid needs >= 2 levels")
        if not (np.diff(self.levels) > 0).all():
            raise ConfigError("amplitude levels must be strictly increasing")
        if not ((self.levels > 0) & np.isfinite(self.levels)).all():
            raise ConfigError("amplitude levels must be positive and finite")

    @classmethod
    def from_quantiles(cls, mset: MeasurementSet,
                       quantiles=(0.2, 0.4, 0.6, 0.8)) -> "AmplitudeGrid":
        """Levels at fractional positions of the curves' common amplitude range,
        guaranteeing every level is inside every curve's support."""
        q = np.asarray(quantiles, dtype=np.float64)
        if ((q <= 0) | (q >= 1)).any():
            raise ConfigError("quantiles must lie strictly inside (0, 1)")
        lo, hi = mset.common_amplitude_range()
        return cls(lo + q * (hi - lo))


@dataclass(frozen=True)
class KdeParams:
    """Gaussian kernel density estimate: bandwidth plus the (sorted) sample."""

    bandwidth: float
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples",
                           np.sort(np.asarray(self.samples, dtype=np.float64)))
        if self.bandwidth <= 0:
            raise ConfigError("KDE bandwidth must be positive")


@dataclass(frozen=True)
class UniformFit:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ConfigError(f"uniform fit needs a < b, got ({self.a!r}, {self.b!r})")


@dataclass(frozen=True)
class GevFit:
    """Generalized extreme value parameters: shape k, scale sigma, location mu.

    Convention: cdf = exp(-(1 + k*(x-mu)/sigma)^(-1/k)); k > 0 gives a heavy
    upper tail.
    """

    k: float
    sigma: float
    mu: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ConfigError("GEV scale sigma must be positive")


def _kde_logpdf(params: KdeParams, f: float) -> float:
    z = (f - params.samples) / params.bandwidth
    # logsumexp over kernels, stable for far-out evaluation points
    m = np.max(-0.5 * z * z)
    s = np.exp(-0.5 * z * z - m).sum()
    return float(m + math.log(s) - math.log(params.samples.size)
                 - math.log(params.bandwidth) - LOG_SQRT_2PI)


def _gev_logpdf(fit: GevFit, x: float) -> float:
    s = (x - fit.mu) / fit.sigma
    if abs(fit.k) < 1e-12:
        return -math.log(fit.sigma) - s - math.exp(-s)
    w = 1.0 + fit.k * s
    if w <= 0.0:
        return -math.inf
    return -math.log(fit.sigma) - (1.0 + 1.0 / fit.k) * math.log(w) - w ** (-1.0 / fit.k)


@dataclass(frozen=True)
class SliceDensity:
    """Fitted frequency density of one amplitude slice."""

    level: float
    kind: str  # "kde" | "uniform" | "gev"
    params: KdeParams | UniformFit | GevFit
    support: tuple[float, float]

    def logpdf(self, f: float) -> float:
        if self.kind == "uniform":
            u: UniformFit = self.params
            if u.a <= f <= u.b:
                return -math.log(u.b - u.a)
            return -math.inf
        if self.kind == "kde":
            return _kde_logpdf(self.params, f)
        if self.kind == "gev":
            return _gev_logpdf(self.params, f)
        raise ConfigError(f"unknown density kind {self.kind!r}")

    def pdf_grid(self, n: int = 200) -> tuple[np.ndarray, np.ndarray]:
        """Density sampled on an even grid over the support (for plots/checks)."""
        x = np.linspace(self.support[0], self.support[1], n)
        y = np.array([math.exp(self.logpdf(v)) for v in x])
        return x, y


def slice_frequencies(mset: MeasurementSet, grid: AmplitudeGrid) -> list[np.ndarray]:
    """Backbone frequencies of every curve at each level; curves whose support
    does not reach a level are skipped there. Each level must keep >= 2 samples."""
    out = []
    for level in grid.levels:
        vals = [c.frequency_at(float(level)) for c in mset.curves]
        freq = np.array([v for v in vals if v is not None], dtype=np.float64)
        if freq.size < 2:
            raise GridCoverageError(
                f"amplitude level {level:.6g} is covered by {freq.size} of "
                f"{len(mset)} curves; need >= 2"
            )
        out.append(freq)
    return out


def _silverman_bandwidth(samples: np.ndarray) -> float:
    n = samples.size
    sd = float(np.std(samples, ddof=1))
    q75, q25 = np.percentile(samples, [75.0, 25.0])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    h = 0.9 * spread * n ** (-0.2)
    floor = 1e-4 * float(np.mean(np.abs(samples)))
    return max(h, floor, 1e-300)


def _lmoments(samples: np.ndarray) -> tuple[float, float, float]:
    """First two L-moments and the L-skewness ratio t3 from an ordered sample."""
    x = np.sort(samples)
    n = x.size
    j = np.arange(n, dtype=np.float64)
    b0 = x.mean()
    b1 = float((j / (n - 1.0) * x).sum() / n)
    b2 = float((j * (j - 1.0) / ((n - 1.0) * (n - 2.0)) * x).sum() / n)
    l1 = b0
    l2 = 2.0 * b1 - b0
    l3 = 6.0 * b2 - 6.0 * b1 + b0
    t3 = l3 / l2 if l2 != 0 else 0.0
    return l1, l2, t3


def _gev_init_lmoments(samples: np.ndarray) -> tuple[float, float, float]:
    """Starting point (k, sigma, mu) via the classic L-moment approximation."""
    l1, l2, t3 = _lmoments(samples)
    c = 2.0 / (3.0 + t3) - math.log(2.0) / math.log(3.0)
    kk = 7.8590 * c + 2.9554 * c * c  # Hosking's shape; our k = -kk
    if abs(kk) < 1e-8:
        sigma = l2 / math.log(2.0)
        mu = l1 - 0.5772156649015329 * sigma
        return 0.0, max(sigma, 1e-12), mu
    g = gamma_fn(1.0 + kk)
    sigma = l2 * kk / ((1.0 - 2.0 ** (-kk)) * g)
    mu = l1 - sigma * (1.0 - g) / kk
    return -kk, max(sigma, 1e-12), mu


def _gev_nll(theta: np.ndarray, samples: np.ndarray) -> float:
    k, log_sigma, mu = theta
    sigma = math.exp(log_sigma)
    s = (samples - mu) / sigma
    if abs(k) < 1e-12:
        return samples.size * log_sigma + float(np.sum(s + np.exp(-s)))
    w = 1.0 + k * s
    if (w <= 0).any():
        return math.inf
    return samples.size * log_sigma + float(
        np.sum((1.0 + 1.0 / k) * np.log(w) + w ** (-1.0 / k))
    )


def _fit_gev(samples: np.ndarray) -> GevFit:
    k0, sigma0, mu0 = _gev_init_lmoments(samples)
    x0 = np.array([k0, math.log(sigma0), mu0])
    res = minimize(_gev_nll, x0, args=(samples,), method="Nelder-Mead",
                   options={"maxiter": 5000, "xatol": 1e-10, "fatol": 1e-10})
    if not res.success or not np.isfinite(res.fun):
        raise FitError(
            f"GEV maximum-likelihood fit did not converge: {res.message} "
            f"(start k={k0:.4g}, sigma={sigma0:.4g}, mu={mu0:.4g}; "
            f"nit={res.nit}, fun={res.fun!r})"
        )
    k, log_sigma, mu = res.x
    return GevFit(k=float(k), sigma=float(math.exp(log_sigma)), mu=float(mu))


def fit_slice(frequencies: np.ndarray, kind: str, level: float = math.nan) -> SliceDensity:
    """Fit the chosen density to one slice's frequency sample.

    kde: Gaussian kernels at the samples, Silverman bandwidth with a floor of
    1e-4 * mean(|samples|). uniform: (min, max) MLE. gev: maximum likelihood
    via Nelder-Mead from an L-moment start (requires >= 8 samples).
    """
    freq = np.sort(np.asarray(frequencies, dtype=np.float64))
    if freq.size < 2:
        raise FitError("need >= 2 samples to fit a slice density")
    if kind == "uniform":
        a, b = float(freq[0]), float(freq[-1])
        if not a < b:
            raise FitError(f"all {freq.size} samples equal {a!r}; uniform fit is degenerate")
        return SliceDensity(level=level, kind=kind, params=UniformFit(a, b), support=(a, b))
    if kind == "kde":
        h = _silverman_bandwidth(freq)
        support = (float(freq[0] - 5.0 * h), float(freq[-1] + 5.0 * h))
        return SliceDensity(level=level, kind=kind,
                            params=KdeParams(bandwidth=h, samples=freq), support=support)
    if kind == "gev":
        if freq.size < 8:
            raise FitError(f"GEV fitting needs >= 8 samples, got {freq.size}")
        fit = _fit_gev(freq)
        if fit.k > 0:
            support = (fit.mu - fit.sigma / fit.k, math.inf)
        elif fit.k < 0:
            support = (-math.inf, fit.mu - fit.sigma / fit.k)
        else:
            support = (-math.inf, math.inf)
        return SliceDensity(level=level, kind=kind, params=fit, support=support)
    raise ConfigError(f"unknown density kind {kind!r}; expected kde, uniform or gev")


@dataclass
class LikelihoodModel:
    """Immutable bundle of grid, per-level densities, model template and the
    extraction settings the measurements were produced with."""

    grid: AmplitudeGrid
    densities: list[SliceDensity]
    template: ModelSpec
    settings: ExtractionSettings

    def __post_init__(self):
        if len(self.densities) != self.grid.levels.size:
            raise ConfigError("one slice density per grid level is required")

    # -- candidate evaluation ------------------------------------------------

    def _candidate_curve(self, updates: dict[str, float]) -> BackboneCurve | None:
        """Backbone of the template with ``updates`` applied; None if the decay
        diverges or yields too few peaks. Integration stops once the response
        has decayed safely below the lowest grid level."""
        spec = self.template.with_params(updates)
        kind, p = spec.kernel_args()
        T_lin = spec.linear_period
        dt = T_lin / self.settings.dt_factor
        n_steps = max(2, int(round(self.settings.t_end_factor * self.settings.dt_factor)))
        win_steps = max(8, int(round(1.2 * self.settings.dt_factor)))
        stop_amp = _CANDIDATE_STOP_FRACTION * float(self.grid.levels[0])
        xs, vs, used, status = _rk4_decay(
            kind, p, self.settings.x0, self.settings.v0, self.settings.z0,
            dt, n_steps, stop_amp, win_steps,
        )
        if status == 1:
            logger.debug("candidate %s diverged at step %d", updates, used)
            return None
        x = xs[: used + 1]
        min_amp = self.settings.min_amplitude
        if min_amp is None:
            min_amp = auto_min_amplitude(x)
        try:
            return extract_backbone(TimeSeries(dt=dt, t0=0.0, x=x, v=vs[: used + 1]),
                                    min_amp)
        except InsufficientDecayError:
            logger.debug("candidate %s produced too few peaks", updates)
            return None

    def log_likelihood(self, theta: dict[str, float]) -> float:
        """Joint log density of the candidate's backbone frequencies at the grid
        levels: sum over levels of log p_j(f_j). Returns -inf when the candidate
        diverges or its backbone does not span every level."""
        curve = self._candidate_curve(theta)
        if curve is None:
            return -math.inf
        freqs = curve.frequencies_at(self.grid.levels)
        if np.isnan(freqs).any():
            logger.debug("candidate %s does not span all grid levels", theta)
            return -math.inf
        total = 0.0
        for dens, f in zip(self.densities, freqs):
            lp = dens.logpdf(float(f))
            if lp == -math.inf:
                return -math.inf
            total += lp
        return total

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        def density_dict(d: SliceDensity) -> dict:
            if d.kind == "kde":
                params = {"bandwidth": d.params.bandwidth,
                          "samples": d.params.samples.tolist()}
            elif d.kind == "uniform":
                params = {"a": d.params.a, "b": d.params.b}
            else:
                params = {"k": d.params.k, "sigma": d.params.sigma, "mu": d.params.mu}
            return {"level": d.level, "kind": d.kind, "params": params,
                    "support": list(d.support)}

        return {
            "format": "backbonemc-likelihood-v1",
            "grid": self.grid.levels.tolist(),
            "densities": [density_dict(d) for d in self.densities],
            "model": {
                "kind": self.template.kind.value,
                "params": [
                    {"name": p.name, "value": p.value, "unit": p.unit}
                    for p in self.template.params.entries
                ],
                "friction_smoothing_eps": self.template.friction_smoothing_eps,
            },
            "extraction": self.settings.as_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LikelihoodModel":
        grid = AmplitudeGrid(np.asarray(d["grid"], dtype=np.float64))
        densities = []
        for dd in d["densities"]:
            kind = dd["kind"]
            if kind == "kde":
                params = KdeParams(bandwidth=dd["params"]["bandwidth"],
                                   samples=np.asarray(dd["params"]["samples"]))
            elif kind == "uniform":
                params = UniformFit(dd["params"]["a"], dd["params"]["b"])
            elif kind == "gev":
                params = GevFit(dd["params"]["k"], dd["params"]["sigma"],
                                dd["params"]["mu"])
            else:
                raise ConfigError(f"unknown density kind {kind!r} in likelihood file")
            densities.append(SliceDensity(level=dd["level"], kind=kind, params=params,
                                          support=tuple(dd["support"])))
        model = d["model"]
        template = ModelSpec(
            ModelKind(model["kind"]),
            ParameterVector(tuple(
                Param(p["name"], p["value"], p.get("unit", ""))
                for p in model["params"]
            )),
            friction_smoothing_eps=model.get("friction_smoothing_eps", 0.0),
        )
        settings = ExtractionSettings.from_dict(d["extraction"])
        return cls(grid=grid, densities=densities, template=template, settings=settings)

    def save(self, path: str | Path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "LikelihoodModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def build_likelihood(
    mset: MeasurementSet,
    template: ModelSpec,
    settings: ExtractionSettings,
    grid: AmplitudeGrid | None = None,
    quantiles=(0.2, 0.4, 0.6, 0.8),
    kind: str = "kde",
) -> LikelihoodModel:
    """Slice the measurement set and fit one density per level.

    With no explicit grid, levels are placed at ``quantiles`` of the curves'
    common amplitude range.
    """
    if len(mset) < 2:
        raise ConfigError("density fitting needs >= 2 measurement curves")
    if grid is None:
        grid = AmplitudeGrid.from_quantiles(mset, quantiles)
    samples = slice_frequencies(mset, grid)
    densities = [
        fit_slice(freq, kind, level=float(level))
        for level, freq in zip(grid.levels, samples)
    ]
    return LikelihoodModel(grid=grid, densities=densities, template=template,
                           settings=settings)


def log_likelihood(model: LikelihoodModel, theta: dict[str, float]) -> float:
    """Free-function form of :meth:`LikelihoodModel.log_likelihood`."""
    return model.log_likelihood(theta)


@dataclass(frozen=True)
class PosteriorTarget:
    """Picklable log-likelihood target over a fixed parameter ordering, for use
    with the samplers (including multi-process chains)."""

    model: LikelihoodModel
    names: tuple[str, ...]

    def __call__(self, theta: np.ndarray) -> float:
        return self.model.log_likelihood(
            {n: float(v) for n, v in zip(self.names, theta)}
        )
