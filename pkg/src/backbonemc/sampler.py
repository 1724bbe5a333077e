"""Random-walk Metropolis-Hastings over the posterior (likelihood x uniform prior).

The proposal is an independent Gaussian step per parameter. The acceptance
ratio is computed in the general Metropolis-Hastings form including both
proposal densities; for this symmetric proposal the two q terms cancel exactly,
so the ratio reduces to min(1, exp(delta log-posterior)) to machine precision.
Out-of-bounds proposals are rejected through the -inf prior without evaluating
the likelihood. Each chain owns one seeded PCG64 generator (numpy's
default_rng), drawing, per iteration, first the proposal step and then the
acceptance uniform, so runs are reproducible bit for bit.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import atomic_write_json, atomic_write_text, csv_text
from .errors import ConfigError, InitializationError

_MAX_START_ATTEMPTS = 200

__all__ = [
    "PriorSpec",
    "ProposalSpec",
    "Chain",
    "log_prior",
    "mh_run",
    "run_chains",
    "acceptance_rate",
    "tune_proposal",
    "save_chain",
    "load_chain",
    "save_chains",
    "load_chains",
]


@dataclass(frozen=True)
class PriorSpec:
    """Independent uniform prior bounds per parameter (closed intervals)."""

    names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=np.float64))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=np.float64))
        if len(self.names) != self.lower.size or self.lower.size != self.upper.size:
            raise ConfigError("names, lower and upper must have equal length")
        if not (self.lower < self.upper).all():
            bad = [n for n, lo, hi in zip(self.names, self.lower, self.upper) if lo >= hi]
            raise ConfigError(f"prior needs lower < upper; violated for {bad}")

    @classmethod
    def from_bounds(cls, bounds: dict[str, tuple[float, float]]) -> "PriorSpec":
        names = tuple(bounds)
        lo = np.array([bounds[n][0] for n in names], dtype=np.float64)
        hi = np.array([bounds[n][1] for n in names], dtype=np.float64)
        return cls(names, lo, hi)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, theta: np.ndarray) -> bool:
        return bool((theta >= self.lower).all() and (theta <= self.upper).all())

    def as_dict(self) -> dict[str, list[float]]:
        return {n: [float(lo), float(hi)]
                for n, lo, hi in zip(self.names, self.lower, self.upper)}


@dataclass(frozen=True)
class ProposalSpec:
    """Per-parameter Gaussian random-walk standard deviations."""

    names: tuple[str, ...]
    sd: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sd", np.asarray(self.sd, dtype=np.float64))
        if len(self.names) != self.sd.size:
            raise ConfigError("names and sd must have equal length")
        if not (self.sd > 0).all():
            raise ConfigError("all proposal standard deviations must be positive")

    @classmethod
    def from_prior(cls, prior: PriorSpec, fraction: float = 0.05) -> "ProposalSpec":
        """Default scaling: a fixed fraction of each prior width."""
        if fraction <= 0:
            raise ConfigError("fraction must be positive")
        return cls(prior.names, fraction * prior.width)

    def scaled(self, factor: float) -> "ProposalSpec":
        return ProposalSpec(self.names, self.sd * factor)

    def as_dict(self) -> dict[str, float]:
        return {n: float(s) for n, s in zip(self.names, self.sd)}


@dataclass
class Chain:
    """One MCMC run: every iteration's state (row 0 is the start), its
    log-posterior, and a per-row acceptance flag. Rows before ``burn_in`` are
    kept on disk/memory but excluded from statistics."""

    names: tuple[str, ...]
    samples: np.ndarray  # (iterations, d)
    log_posterior: np.ndarray
    accepted_flags: np.ndarray
    seed: int
    burn_in: int

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        self.log_posterior = np.asarray(self.log_posterior, dtype=np.float64)
        self.accepted_flags = np.asarray(self.accepted_flags, dtype=bool)
        T = self.samples.shape[0]
        if self.log_posterior.size != T or self.accepted_flags.size != T:
            raise ConfigError("samples, log_posterior and accepted_flags lengths differ")
        if not 0 <= self.burn_in < T:
            raise ConfigError("burn_in must lie inside the chain")

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def accepted(self) -> int:
        return int(self.accepted_flags.sum())

    @property
    def post_burn_in(self) -> np.ndarray:
        return self.samples[self.burn_in:]

    def parameter_index(self, parameter: int | str) -> int:
        if isinstance(parameter, str):
            try:
                return self.names.index(parameter)
            except ValueError:
                raise ConfigError(f"unknown parameter {parameter!r}; chain has {self.names}")
        return int(parameter)


def log_prior(prior: PriorSpec, theta: np.ndarray) -> float:
    """Unnormalized log uniform prior: 0 inside the (closed) bounds, -inf outside."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.size != len(prior.names):
        raise ConfigError("theta length does not match the prior")
    return 0.0 if prior.contains(theta) else -math.inf


def acceptance_rate(chain: Chain) -> float:
    """Accepted transitions over proposals made (iterations - 1)."""
    if len(chain) < 2:
        return 0.0
    return chain.accepted / (len(chain) - 1)


def _gaussian_logq(to: np.ndarray, frm: np.ndarray, sd: np.ndarray) -> float:
    z = (to - frm) / sd
    return float(-0.5 * np.dot(z, z) - np.log(sd).sum()
                 - 0.5 * z.size * math.log(2.0 * math.pi))


def _mh_step(target, prior: PriorSpec, sd: np.ndarray, theta: np.ndarray,
             lp: float, rng: np.random.Generator):
    """One Metropolis-Hastings transition. Returns (theta, lp, accepted)."""
    proposal = theta + rng.standard_normal(theta.size) * sd
    u = rng.random()
    if log_prior(prior, proposal) == -math.inf:
        return theta, lp, False
    lp_prop = log_prior(prior, proposal) + target(proposal)
    # general MH ratio; the symmetric Gaussian q terms cancel exactly
    delta = (lp_prop + _gaussian_logq(theta, proposal, sd)
             - lp - _gaussian_logq(proposal, theta, sd))
    alpha = 1.0 if delta >= 0 else math.exp(delta)
    if alpha > 0.0 and u <= alpha:
        return proposal, lp_prop, True
    return theta, lp, False


def mh_run(
    target,
    prior: PriorSpec,
    proposal: ProposalSpec,
    theta0: np.ndarray | None = None,
    iterations: int = 20000,
    seed: int = 0,
    burn_in_fraction: float = 0.1,
    stratum: tuple[int, int] | None = None,
) -> Chain:
    """Run one random-walk Metropolis-Hastings chain.

    ``target`` is the log posterior up to the flat prior constant (typically
    the log likelihood); the uniform prior itself is applied internally, and
    proposals outside the bounds are rejected without calling ``target``.
    theta0 defaults to the prior midpoint; ``stratum = (i, n)`` instead draws
    the start uniformly inside stratum i of n per parameter (overdispersed
    multi-chain starts). When a defaulted start has -inf target (hard-support
    likelihoods such as uniform slice densities), feasible starts are searched
    by rejection sampling from the prior with the chain's own generator, so the
    run stays deterministic. An explicitly given infeasible theta0 is an error.
    """
    if iterations < 100:
        raise ConfigError("iterations must be >= 100")
    if tuple(proposal.names) != tuple(prior.names):
        raise ConfigError("proposal and prior must cover the same parameters in order")
    d = len(prior.names)
    rng = np.random.default_rng(seed)
    explicit = theta0 is not None
    if theta0 is None:
        if stratum is not None:
            i, n = stratum
            if not 0 <= i < n:
                raise ConfigError("stratum index out of range")
            frac = (i + rng.random(d)) / n
            theta0 = prior.lower + frac * prior.width
        else:
            theta0 = prior.midpoint
    theta0 = np.asarray(theta0, dtype=np.float64)
    if log_prior(prior, theta0) == -math.inf:
        raise InitializationError(f"theta0 {theta0.tolist()} lies outside the prior bounds")
    lp0 = log_prior(prior, theta0) + target(theta0)
    if not np.isfinite(lp0):
        if explicit:
            raise InitializationError(
                f"target is not finite at theta0 {theta0.tolist()} (log posterior {lp0!r})"
            )
        for _ in range(_MAX_START_ATTEMPTS):
            theta0 = prior.lower + rng.random(d) * prior.width
            lp0 = target(theta0)
            if np.isfinite(lp0):
                break
        else:
            raise InitializationError(
                f"no feasible start found in {_MAX_START_ATTEMPTS} prior draws; "
                "the likelihood support may not intersect the prior"
            )

    samples = np.empty((iterations, d))
    logp = np.empty(iterations)
    flags = np.zeros(iterations, dtype=bool)
    samples[0] = theta0
    logp[0] = lp0
    theta, lp = theta0, lp0
    for t in range(1, iterations):
        theta, lp, accepted = _mh_step(target, prior, proposal.sd, theta, lp, rng)
        samples[t] = theta
        logp[t] = lp
        flags[t] = accepted
    return Chain(
        names=tuple(prior.names),
        samples=samples,
        log_posterior=logp,
        accepted_flags=flags,
        seed=int(seed),
        burn_in=int(burn_in_fraction * iterations),
    )


def _run_one_chain(args) -> Chain:
    target, prior, proposal, iterations, seed, burn_in_fraction, stratum = args
    return mh_run(target, prior, proposal, iterations=iterations, seed=seed,
                  burn_in_fraction=burn_in_fraction, stratum=stratum)


def run_chains(
    target,
    prior: PriorSpec,
    proposal: ProposalSpec,
    iterations: int,
    seeds: list[int],
    burn_in_fraction: float = 0.1,
    workers: int = 1,
) -> list[Chain]:
    """Independent chains with distinct seeds and stratified overdispersed
    starts (a single chain starts at the prior midpoint, exactly like mh_run).
    Each chain is self-contained, so results do not depend on execution order;
    with ``workers`` > 1 the chains run in separate processes, which requires a
    picklable ``target``.
    """
    n = len(seeds)
    if n < 1:
        raise ConfigError("need at least one seed")
    if len(set(int(s) for s in seeds)) != n:
        raise ConfigError(f"chain seeds must be distinct, got {list(seeds)}")
    jobs = [
        (target, prior, proposal, iterations, int(seed), burn_in_fraction,
         (i, n) if n > 1 else None)
        for i, seed in enumerate(seeds)
    ]
    if workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=min(workers, n)) as pool:
            return list(pool.map(_run_one_chain, jobs))
    return [_run_one_chain(job) for job in jobs]


def tune_proposal(
    target,
    prior: PriorSpec,
    proposal: ProposalSpec,
    seed: int,
    pilot_iterations: int = 500,
    rate_window: tuple[float, float] = (0.2, 0.5),
    max_rounds: int = 12,
) -> ProposalSpec:
    """Optional pilot-run scaler: double or halve the step sizes until a short
    pilot chain's acceptance rate falls inside ``rate_window``. Off by default
    in the pipeline so that published runs stay exactly reproducible."""
    lo, hi = rate_window
    current = proposal
    for round_idx in range(max_rounds):
        pilot = mh_run(target, prior, current, iterations=max(100, pilot_iterations),
                       seed=seed + round_idx, burn_in_fraction=0.0)
        rate = acceptance_rate(pilot)
        if lo <= rate <= hi:
            return current
        current = current.scaled(0.5 if rate < lo else 2.0)
    return current


# ---------------------------------------------------------------------------
# persistence

def _chain_csv(chain: Chain) -> str:
    header = list(chain.names) + ["log_posterior", "accepted"]
    rows = (
        list(map(float, chain.samples[i]))
        + [float(chain.log_posterior[i]), int(chain.accepted_flags[i])]
        for i in range(len(chain))
    )
    return csv_text(header, rows)


def save_chain(chain: Chain, path: str | Path) -> None:
    atomic_write_text(path, _chain_csv(chain))


def load_chain(path: str | Path, seed: int = 0, burn_in: int = 0) -> Chain:
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    if header[-2:] != ["log_posterior", "accepted"]:
        raise ConfigError(f"{path}: expected trailing log_posterior,accepted columns")
    names = tuple(header[:-2])
    data = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
    return Chain(
        names=names,
        samples=data[:, : len(names)],
        log_posterior=data[:, -2],
        accepted_flags=data[:, -1] > 0.5,
        seed=seed,
        burn_in=burn_in,
    )


def save_chains(chains: list[Chain], directory: str | Path,
                extra_manifest: dict | None = None) -> list[str]:
    """Write one CSV per chain plus a manifest with seeds, burn-in and rates."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for i, chain in enumerate(chains):
        name = f"chain_{i:02d}.csv"
        save_chain(chain, directory / name)
        files.append(name)
    manifest = {
        "format": "backbonemc-chains-v1",
        "files": files,
        "parameters": list(chains[0].names),
        "iterations": len(chains[0]),
        "seeds": [c.seed for c in chains],
        "burn_in": [c.burn_in for c in chains],
        "acceptance_rates": [acceptance_rate(c) for c in chains],
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    atomic_write_json(directory / "chains_manifest.json", manifest)
    return files


def load_chains(directory: str | Path) -> list[Chain]:
    directory = Path(directory)
    manifest = json.loads((directory / "chains_manifest.json").read_text())
    chains = []
    for name, seed, burn_in in zip(manifest["files"], manifest["seeds"],
                                   manifest["burn_in"]):
        chains.append(load_chain(directory / name, seed=seed, burn_in=burn_in))
    return chains
