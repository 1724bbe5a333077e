"""Run configuration: a JSON file with explicit units in parameter key names.

Parameter keys follow ``<name>_<unit-slug>``, e.g. ``k1_n_per_m: 6500.0`` or
``kn_n_per_m3: 9.16e9``. The slug is a label only (no magnitude conversion);
it forces the author to state, next to every number, which coherent SI unit
the value is in, which is what prevents MN/GN magnitude slips. Names without
an underscore (``alpha``, ``A``, ``n``) are dimensionless.

Manifests written by the CLI embed the fully resolved config under a
``"config"`` key; passing such a manifest back as ``--config`` reproduces the
original run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backbone import ExtractionSettings
from .dynamics import REQUIRED_PARAMS, ModelKind, ModelSpec, ParameterVector
from .ensemble import MeasurementSet, TrueDistribution
from .errors import ConfigError
from .likelihood import AmplitudeGrid
from .sampler import PriorSpec, ProposalSpec

__all__ = ["RunConfig", "load_run_config", "parse_run_config", "split_param_key"]

DENSITY_KINDS = ("kde", "uniform", "gev")


def split_param_key(key: str) -> tuple[str, str]:
    """'k1_n_per_m' -> ('k1', 'n_per_m'); a bare key is dimensionless."""
    if "_" in key:
        name, unit = key.split("_", 1)
    else:
        name, unit = key, ""
    if not name:
        raise ConfigError(f"malformed parameter key {key!r}")
    return name, unit


def _parse_param_map(obj, where: str) -> tuple[dict[str, float], dict[str, str]]:
    if not isinstance(obj, dict) or not obj:
        raise ConfigError(f"{where}: expected a non-empty mapping of parameter keys")
    values: dict[str, float] = {}
    units: dict[str, str] = {}
    for key, raw in obj.items():
        name, unit = split_param_key(key)
        if name in values:
            raise ConfigError(f"{where}: duplicate parameter {name!r}")
        values[name] = _as_float(raw, f"{where}.{key}")
        units[name] = unit
    return values, units


def _as_float(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _as_int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}: expected an integer, got {v!r}")
    return v


def _parse_bounds_map(obj, where: str) -> dict[str, tuple[float, float]]:
    if not isinstance(obj, dict) or not obj:
        raise ConfigError(f"{where}: expected a non-empty mapping of parameter bounds")
    out: dict[str, tuple[float, float]] = {}
    for key, pair in obj.items():
        name, _ = split_param_key(key)
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ConfigError(f"{where}.{key}: expected [lower, upper]")
        out[name] = (_as_float(pair[0], f"{where}.{key}[0]"),
                     _as_float(pair[1], f"{where}.{key}[1]"))
    return out


@dataclass
class RunConfig:
    """Parsed and validated run configuration."""

    model_kind: ModelKind
    model_params: dict[str, float]
    model_units: dict[str, str]
    friction_smoothing_eps: float
    # true distribution (optional for purely file-based measurement inputs)
    true_bounds: dict[str, tuple[float, float]] | None
    true_samples: dict[str, list[float]] | None
    ensemble_count: int
    ensemble_seed: int | None
    # inference
    prior_bounds: dict[str, tuple[float, float]] | None
    proposal_sd: dict[str, float] | None
    proposal_fraction: float | None
    iterations: int
    n_chains: int
    burn_in_fraction: float
    seeds: list[int] | None
    tune: bool
    # extraction + likelihood
    x0: float
    v0: float
    dt_factor: float
    t_end_factor: float
    min_amplitude: float | None
    density: str
    grid_quantiles: list[float] | None
    grid_levels: list[float] | None
    # output
    out_dir: str
    plots: bool
    raw: dict = field(repr=False, default_factory=dict)

    # -- materialization ----------------------------------------------------

    def template(self) -> ModelSpec:
        required = REQUIRED_PARAMS[self.model_kind]
        missing = set(required) - set(self.model_params)
        if missing:
            raise ConfigError(f"model.params: missing {sorted(missing)} for "
                              f"{self.model_kind.value}")
        ordered = {n: self.model_params[n] for n in required}
        units = {n: self.model_units.get(n, "") for n in required}
        return ModelSpec(self.model_kind, ParameterVector.from_dict(ordered, units),
                         friction_smoothing_eps=self.friction_smoothing_eps)

    def extraction_settings(self) -> ExtractionSettings:
        return ExtractionSettings(
            x0=self.x0, v0=self.v0, dt_factor=self.dt_factor,
            t_end_factor=self.t_end_factor, min_amplitude=self.min_amplitude,
        )

    def true_distribution(self) -> TrueDistribution:
        if self.true_bounds is None:
            raise ConfigError("true_distribution.bounds: section required")
        return TrueDistribution.from_bounds(self.true_bounds)

    def injected_samples(self) -> tuple[tuple[str, ...], np.ndarray] | None:
        if self.true_samples is None:
            return None
        names = tuple(self.true_samples)
        lengths = {len(v) for v in self.true_samples.values()}
        if len(lengths) != 1:
            raise ConfigError("true_distribution.samples: value lists must share a length")
        return names, np.column_stack([self.true_samples[n] for n in names])

    def prior(self) -> PriorSpec:
        if self.prior_bounds is None:
            raise ConfigError("prior.bounds: section required for sampling")
        return PriorSpec.from_bounds(self.prior_bounds)

    def proposal(self, prior: PriorSpec) -> ProposalSpec:
        if self.proposal_sd is not None:
            missing = set(prior.names) - set(self.proposal_sd)
            if missing:
                raise ConfigError(f"proposal.sd: missing {sorted(missing)}")
            return ProposalSpec(prior.names,
                                np.array([self.proposal_sd[n] for n in prior.names]))
        fraction = self.proposal_fraction if self.proposal_fraction is not None else 0.05
        return ProposalSpec.from_prior(prior, fraction)

    def chain_seeds(self) -> list[int]:
        if self.seeds is None:
            raise ConfigError("mcmc.seed or mcmc.seeds: explicit seeding required "
                              "(wall-clock seeding is not supported)")
        return self.seeds

    def grid(self, mset: MeasurementSet) -> AmplitudeGrid:
        if self.grid_levels is not None:
            return AmplitudeGrid(np.asarray(self.grid_levels, dtype=np.float64))
        quantiles = self.grid_quantiles or [0.2, 0.4, 0.6, 0.8]
        return AmplitudeGrid.from_quantiles(mset, quantiles)

    def true_moments(self) -> dict[str, tuple[float, float]] | None:
        """Mean/sd per parameter implied by the truth section, for report tables."""
        if self.true_bounds is not None:
            out = {}
            for n, (lo, hi) in self.true_bounds.items():
                out[n] = ((lo + hi) / 2.0, (hi - lo) / np.sqrt(12.0))
            return out
        if self.true_samples is not None:
            return {
                n: (float(np.mean(v)), float(np.std(v, ddof=1)))
                for n, v in self.true_samples.items()
            }
        return None

    def resolved_dict(self) -> dict:
        return self.raw


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if "config" in raw and isinstance(raw["config"], dict):
        raw = raw["config"]  # manifests embed the resolved config
    return parse_run_config(raw)


def parse_run_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    model = raw.get("model")
    if not isinstance(model, dict):
        raise ConfigError("model: section required")
    kind_name = model.get("kind")
    try:
        kind = ModelKind(kind_name)
    except ValueError:
        raise ConfigError(
            f"model.kind: unknown kind {kind_name!r}; expected one of "
            f"{[k.value for k in ModelKind]}"
        )
    params, units = _parse_param_map(model.get("params"), "model.params")
    eps = _as_float(model.get("friction_smoothing_eps", 0.0),
                    "model.friction_smoothing_eps")

    true_bounds = None
    true_samples = None
    count = 0
    ensemble_seed = None
    td = raw.get("true_distribution")
    if td is not None:
        if not isinstance(td, dict):
            raise ConfigError("true_distribution: expected a mapping")
        if "bounds" in td and "samples" in td:
            raise ConfigError("true_distribution: give either bounds or samples, not both")
        if "bounds" in td:
            true_bounds = _parse_bounds_map(td["bounds"], "true_distribution.bounds")
            count = _as_int(td.get("count", 50), "true_distribution.count")
            if count < 2:
                raise ConfigError("true_distribution.count: need >= 2 curves "
                                  "(density fitting requires at least two)")
            if "seed" not in td:
                raise ConfigError("true_distribution.seed: explicit seed required")
            ensemble_seed = _as_int(td["seed"], "true_distribution.seed")
        elif "samples" in td:
            samples_raw = td["samples"]
            if not isinstance(samples_raw, dict) or not samples_raw:
                raise ConfigError("true_distribution.samples: expected a mapping of "
                                  "parameter key -> list of values")
            true_samples = {}
            for key, vals in samples_raw.items():
                name, _ = split_param_key(key)
                if not isinstance(vals, list) or len(vals) < 2:
                    raise ConfigError(
                        f"true_distribution.samples.{key}: need a list of >= 2 values"
                    )
                true_samples[name] = [_as_float(v, f"true_distribution.samples.{key}")
                                      for v in vals]
            count = len(next(iter(true_samples.values())))
        else:
            raise ConfigError("true_distribution: needs bounds or samples")

    prior_bounds = None
    if "prior" in raw:
        prior_bounds = _parse_bounds_map(raw["prior"].get("bounds"), "prior.bounds")

    proposal_sd = None
    proposal_fraction = None
    prop = raw.get("proposal")
    if prop is not None:
        if "sd" in prop:
            sd_map, _ = _parse_param_map(prop["sd"], "proposal.sd")
            proposal_sd = sd_map
        if "fraction_of_prior_width" in prop:
            proposal_fraction = _as_float(prop["fraction_of_prior_width"],
                                          "proposal.fraction_of_prior_width")

    mcmc = raw.get("mcmc", {})
    iterations = _as_int(mcmc.get("iterations", 20000), "mcmc.iterations")
    n_chains = _as_int(mcmc.get("chains", 1), "mcmc.chains")
    if n_chains < 1:
        raise ConfigError("mcmc.chains: need >= 1")
    burn_in_fraction = _as_float(mcmc.get("burn_in_fraction", 0.1),
                                 "mcmc.burn_in_fraction")
    if not 0.0 <= burn_in_fraction < 1.0:
        raise ConfigError("mcmc.burn_in_fraction: must lie in [0, 1)")
    seeds = None
    if "seeds" in mcmc:
        seeds_raw = mcmc["seeds"]
        if not isinstance(seeds_raw, list) or not seeds_raw:
            raise ConfigError("mcmc.seeds: expected a non-empty list of integers")
        seeds = [_as_int(s, "mcmc.seeds") for s in seeds_raw]
        if len(seeds) != n_chains:
            raise ConfigError(
                f"mcmc.seeds: got {len(seeds)} seeds for {n_chains} chains"
            )
    elif "seed" in mcmc:
        base = _as_int(mcmc["seed"], "mcmc.seed")
        seeds = [base + i for i in range(n_chains)]
    tune = bool(mcmc.get("tune", False))

    ext = raw.get("extraction", {})
    x0 = _as_float(ext.get("initial_displacement_m", 0.0), "extraction.initial_displacement_m")
    v0 = _as_float(ext.get("initial_velocity_m_per_s", 0.0),
                   "extraction.initial_velocity_m_per_s")
    if x0 == 0.0 and v0 == 0.0 and td is not None:
        raise ConfigError("extraction: a non-zero initial displacement or velocity "
                          "is required to excite the decay")
    dt_factor = _as_float(ext.get("dt_factor", 200), "extraction.dt_factor")
    t_end_factor = _as_float(ext.get("t_end_factor", 400), "extraction.t_end_factor")
    min_amp = ext.get("min_amplitude_m")
    if min_amp is not None:
        min_amp = _as_float(min_amp, "extraction.min_amplitude_m")

    lik = raw.get("likelihood", {})
    density = lik.get("density", "kde")
    if density not in DENSITY_KINDS:
        raise ConfigError(f"likelihood.density: {density!r} not in {DENSITY_KINDS}")
    grid_quantiles = lik.get("grid_quantiles")
    grid_levels = lik.get("grid_levels_m")
    if grid_quantiles is not None and grid_levels is not None:
        raise ConfigError("likelihood: give grid_quantiles or grid_levels_m, not both")
    if grid_quantiles is not None:
        grid_quantiles = [_as_float(q, "likelihood.grid_quantiles") for q in grid_quantiles]
    if grid_levels is not None:
        grid_levels = [_as_float(v, "likelihood.grid_levels_m") for v in grid_levels]

    out = raw.get("output", {})
    out_dir = out.get("directory", "out")
    plots = bool(out.get("plots", True))

    return RunConfig(
        model_kind=kind,
        model_params=params,
        model_units=units,
        friction_smoothing_eps=eps,
        true_bounds=true_bounds,
        true_samples=true_samples,
        ensemble_count=count,
        ensemble_seed=ensemble_seed,
        prior_bounds=prior_bounds,
        proposal_sd=proposal_sd,
        proposal_fraction=proposal_fraction,
        iterations=iterations,
        n_chains=n_chains,
        burn_in_fraction=burn_in_fraction,
        seeds=seeds,
        tune=tune,
        x0=x0,
        v0=v0,
        dt_factor=dt_factor,
        t_end_factor=t_end_factor,
        min_amplitude=min_amp,
        density=density,
        grid_quantiles=grid_quantiles,
        grid_levels=grid_levels,
        out_dir=out_dir,
        plots=plots,
        raw=raw,
    )
