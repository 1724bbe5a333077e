"""Synthetic measurement sets: ensembles of backbone curves drawn from a
parameter distribution, plus directory save/load for measured sets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import atomic_write_json, atomic_write_text
from .backbone import BackboneCurve, ExtractionSettings, simulate_backbone
from .dynamics import ModelSpec
from .errors import BackboneMcError, ConfigError

__all__ = [
    "TrueDistribution",
    "MeasurementSet",
    "uniform_bounds_from_moments",
    "draw_parameters",
    "generate_measurements",
    "generate_from_params",
    "save_measurements",
    "load_measurements",
]

SQRT3 = math.sqrt(3.0)


def uniform_bounds_from_moments(mean: float, sd: float) -> tuple[float, float]:
    """Invert the uniform-distribution moment formulas: half-width = sd*sqrt(3)."""
    if sd < 0:
        raise ConfigError("standard deviation must be non-negative")
    h = sd * SQRT3
    return mean - h, mean + h


@dataclass(frozen=True)
class TrueDistribution:
    """Independent per-parameter uniform bounds; lower == upper fixes a parameter."""

    names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=np.float64))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=np.float64))
        if len(self.names) != self.lower.size or self.lower.size != self.upper.size:
            raise ConfigError("names, lower and upper must have equal length")
        if len(set(self.names)) != len(self.names):
            raise ConfigError("parameter names must be unique")
        if (self.lower > self.upper).any():
            bad = [n for n, lo, hi in zip(self.names, self.lower, self.upper) if lo > hi]
            raise ConfigError(f"lower bound exceeds upper bound for {bad}")

    @classmethod
    def from_bounds(cls, bounds: dict[str, tuple[float, float]]) -> "TrueDistribution":
        names = tuple(bounds)
        lo = np.array([bounds[n][0] for n in names], dtype=np.float64)
        hi = np.array([bounds[n][1] for n in names], dtype=np.float64)
        return cls(names, lo, hi)

    @classmethod
    def from_moments(cls, moments: dict[str, tuple[float, float]]) -> "TrueDistribution":
        return cls.from_bounds(
            {n: uniform_bounds_from_moments(mu, sd) for n, (mu, sd) in moments.items()}
        )

    def as_dict(self) -> dict[str, list[float]]:
        return {
            n: [float(lo), float(hi)]
            for n, lo, hi in zip(self.names, self.lower, self.upper)
        }


@dataclass
class MeasurementSet:
    """A collection of backbone curves plus how it was produced.

    ``provenance`` is a JSON-ready dict with at least a "kind" key
    ("synthetic" or "file"). For synthetic sets, ``params`` keeps the
    parameter vector behind each curve (rows align with ``curves``).
    """

    curves: list[BackboneCurve]
    provenance: dict
    params: np.ndarray | None = None
    param_names: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.curves:
            raise ConfigError("a measurement set needs at least one curve")

    def __len__(self) -> int:
        return len(self.curves)

    def common_amplitude_range(self) -> tuple[float, float]:
        """Intersection of all curves' amplitude supports."""
        lo = max(c.amplitude_range[0] for c in self.curves)
        hi = min(c.amplitude_range[1] for c in self.curves)
        if lo >= hi:
            raise ConfigError(
                "measurement curves share no common amplitude range "
                f"(intersection [{lo:.3g}, {hi:.3g}])"
            )
        return lo, hi


def draw_parameters(dist: TrueDistribution, count: int, seed: int) -> np.ndarray:
    """i.i.d. uniform draws within bounds; row i is the parameter vector of
    ensemble member i. The whole matrix is drawn up-front in one seeded pass so
    downstream parallelism cannot change the draw sequence."""
    if count < 1:
        raise ConfigError("count must be >= 1")
    rng = np.random.default_rng(seed)
    return rng.uniform(dist.lower, dist.upper, size=(count, len(dist.names)))


def _simulate_member(template: ModelSpec, names, row, settings, index: int) -> BackboneCurve:
    spec = template.with_params(dict(zip(names, (float(v) for v in row))))
    try:
        return simulate_backbone(spec, settings, meta={"member": index})
    except BackboneMcError as exc:
        raise type(exc)(
            f"ensemble member {index} with {dict(zip(names, row.tolist()))} failed: {exc}"
        ) from exc


def generate_measurements(
    template: ModelSpec,
    dist: TrueDistribution,
    count: int,
    settings: ExtractionSettings,
    seed: int,
) -> MeasurementSet:
    """Draw ``count`` parameter vectors from ``dist`` and simulate one backbone
    curve per draw. Deterministic given the seed; all members share the initial
    conditions in ``settings``."""
    if count < 2:
        raise ConfigError("count must be >= 2 (density fitting needs >= 2 curves)")
    draws = draw_parameters(dist, count, seed)
    curves = [
        _simulate_member(template, dist.names, draws[i], settings, i)
        for i in range(count)
    ]
    provenance = {
        "kind": "synthetic",
        "method": "uniform",
        "seed": int(seed),
        "count": int(count),
        "bounds": dist.as_dict(),
    }
    return MeasurementSet(curves, provenance, params=draws, param_names=dist.names)


def generate_from_params(
    template: ModelSpec,
    names: tuple[str, ...] | list[str],
    params: np.ndarray,
    settings: ExtractionSettings,
) -> MeasurementSet:
    """Simulate backbone curves at explicitly given parameter vectors (one row
    per curve) instead of random draws."""
    params = np.atleast_2d(np.asarray(params, dtype=np.float64))
    if params.shape[0] < 2:
        raise ConfigError("need >= 2 parameter vectors")
    if params.shape[1] != len(names):
        raise ConfigError("parameter matrix width must match the number of names")
    names = tuple(names)
    curves = [
        _simulate_member(template, names, params[i], settings, i)
        for i in range(params.shape[0])
    ]
    provenance = {
        "kind": "synthetic",
        "method": "injected",
        "count": int(params.shape[0]),
        "samples": {n: params[:, j].tolist() for j, n in enumerate(names)},
    }
    return MeasurementSet(curves, provenance, params=params, param_names=names)


def save_measurements(mset: MeasurementSet, directory: str | Path) -> None:
    """One CSV per curve plus a manifest recording provenance and parameters."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(len(mset.curves) - 1)))
    names = []
    for i, curve in enumerate(mset.curves):
        name = f"curve_{i:0{width}d}.csv"
        atomic_write_text(directory / name, curve.to_csv())
        names.append(name)
    manifest = {
        "format": "backbonemc-measurements-v1",
        "curves": names,
        "provenance": mset.provenance,
    }
    if mset.params is not None and mset.param_names is not None:
        manifest["param_names"] = list(mset.param_names)
        manifest["params"] = [row.tolist() for row in np.atleast_2d(mset.params)]
    atomic_write_json(directory / "manifest.json", manifest)


def load_measurements(directory: str | Path) -> MeasurementSet:
    """Load a measurement set saved by :func:`save_measurements`, or a bare
    directory of externally measured backbone CSVs (no manifest needed)."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        names = sorted(p.name for p in directory.glob("*.csv"))
        if not names:
            raise ConfigError(f"no manifest.json and no curve CSVs in {directory}")
        manifest = {"curves": names}
    else:
        manifest = json.loads(manifest_path.read_text())
    curves = [
        BackboneCurve.from_csv((directory / name).read_text(), meta={"file": name})
        for name in manifest["curves"]
    ]
    params = None
    param_names = None
    if "params" in manifest:
        params = np.asarray(manifest["params"], dtype=np.float64)
        param_names = tuple(manifest.get("param_names", ()))
    provenance = {
        "kind": "file",
        "path": str(directory),
        "original": manifest.get("provenance", {}),
    }
    return MeasurementSet(curves, provenance, params=params, param_names=param_names)
