"""Command-line pipeline: generate, extract, build-likelihood, sample, report.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import _svg
from ._io import atomic_write_json, atomic_write_text, csv_text
from .backbone import auto_min_amplitude, extract_backbone
from .config import RunConfig, load_run_config
from .diagnostics import compare_slices, gelman_rubin, posterior_predictive, summarize
from .dynamics import TimeSeries
from .ensemble import (
    generate_from_params,
    generate_measurements,
    load_measurements,
    save_measurements,
)
from .errors import BackboneMcError, ConfigError
from .likelihood import LikelihoodModel, PosteriorTarget, build_likelihood
from .sampler import (
    acceptance_rate,
    load_chains,
    run_chains,
    save_chains,
    tune_proposal,
)

_NUMERICAL_ERRORS = BackboneMcError  # everything except ConfigError maps to exit 3


def _default_workers() -> int:
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# subcommands

def cmd_generate(config: RunConfig, out_dir: Path) -> Path:
    """Simulate the synthetic measurement set and write one CSV per curve."""
    template = config.template()
    settings = config.extraction_settings()
    injected = config.injected_samples()
    if injected is not None:
        names, params = injected
        mset = generate_from_params(template, names, params, settings)
    else:
        dist = config.true_distribution()
        if config.ensemble_seed is None:
            raise ConfigError("true_distribution.seed: explicit seed required")
        mset = generate_measurements(template, dist, config.ensemble_count,
                                     settings, config.ensemble_seed)
    meas_dir = out_dir / "measurements"
    save_measurements(mset, meas_dir)
    atomic_write_json(meas_dir / "run_manifest.json", {"config": config.resolved_dict()})
    print(f"wrote {len(mset)} backbone curves to {meas_dir}")
    return meas_dir


def cmd_extract(input_path: Path, out_path: Path, min_amplitude: float | None) -> None:
    """Convert a (t, x) time-series CSV into a backbone CSV."""
    ts = TimeSeries.from_csv(Path(input_path).read_text())
    if min_amplitude is None:
        min_amplitude = auto_min_amplitude(ts.x)
    curve = extract_backbone(ts, min_amplitude)
    atomic_write_text(out_path, curve.to_csv())
    print(f"extracted {len(curve)} backbone points to {out_path}")


def cmd_build_likelihood(config: RunConfig, measurements_dir: Path,
                         out_path: Path) -> LikelihoodModel:
    mset = load_measurements(measurements_dir)
    model = build_likelihood(
        mset,
        config.template(),
        config.extraction_settings(),
        grid=config.grid(mset),
        kind=config.density,
    )
    model.save(out_path)
    print(f"likelihood over {model.grid.levels.size} amplitude levels "
          f"({config.density}) written to {out_path}")
    return model


def _boundary_pileup_warnings(chains, prior) -> list[str]:
    """Flag parameters whose posterior mass concentrates against a prior edge,
    the signature of a prior that excludes the data-supported region."""
    pooled = np.concatenate([c.post_burn_in for c in chains], axis=0)
    edge = 0.02 * prior.width
    warnings = []
    for j, name in enumerate(prior.names):
        col = pooled[:, j]
        frac_lo = float(np.mean(col <= prior.lower[j] + edge[j]))
        frac_hi = float(np.mean(col >= prior.upper[j] - edge[j]))
        for frac, side, bound in ((frac_lo, "lower", prior.lower[j]),
                                  (frac_hi, "upper", prior.upper[j])):
            if frac > 0.3:
                warnings.append(
                    f"warning: {frac:.0%} of the posterior mass for {name!r} sits "
                    f"against the {side} prior bound {bound:.6g}; the prior may "
                    "exclude the region supported by the measurements"
                )
    return warnings


def cmd_sample(config: RunConfig, out_dir: Path,
               measurements_dir: Path | None = None,
               likelihood_path: Path | None = None,
               workers: int | None = None) -> Path:
    """Build or load the likelihood, run the chains, persist chain CSVs."""
    if (measurements_dir is None) == (likelihood_path is None):
        raise ConfigError("sample needs exactly one of --measurements or --likelihood")
    chains_dir = out_dir / "chains"
    chains_dir.mkdir(parents=True, exist_ok=True)
    if likelihood_path is not None:
        model = LikelihoodModel.load(likelihood_path)
    else:
        model = cmd_build_likelihood(config, measurements_dir, chains_dir / "likelihood.json")
    prior = config.prior()
    proposal = config.proposal(prior)
    target = PosteriorTarget(model, prior.names)
    if config.tune:
        proposal = tune_proposal(target, prior, proposal, seed=config.chain_seeds()[0])
    seeds = config.chain_seeds()
    workers = workers if workers is not None else min(len(seeds), _default_workers())
    chains = run_chains(
        target, prior, proposal, config.iterations, seeds,
        burn_in_fraction=config.burn_in_fraction, workers=workers,
    )
    if likelihood_path is not None:
        model.save(chains_dir / "likelihood.json")
    pileup = _boundary_pileup_warnings(chains, prior)
    save_chains(chains, chains_dir, extra_manifest={
        "prior": prior.as_dict(),
        "proposal": proposal.as_dict(),
        "warnings": pileup,
        "config": config.resolved_dict(),
    })
    for i, chain in enumerate(chains):
        print(f"chain {i}: seed {chain.seed}, acceptance rate "
              f"{acceptance_rate(chain):.3f}")
    for line in pileup:
        print(line)
    return chains_dir


def _moment_columns(moments: dict | None, name: str) -> list:
    if moments is None or name not in moments:
        return ["", ""]
    mu, sd = moments[name]
    return [float(mu), float(sd)]


def _fit_columns(density) -> tuple[list[str], list]:
    if density.kind == "uniform":
        return ["a", "b"], [density.params.a, density.params.b]
    if density.kind == "gev":
        return ["k", "sigma", "mu"], [density.params.k, density.params.sigma,
                                      density.params.mu]
    return ["support_lo", "support_hi", "bandwidth"], [
        density.support[0], density.support[1], density.params.bandwidth,
    ]


def cmd_report(chains_dir: Path, measurements_dir: Path, out_dir: Path,
               config: RunConfig | None = None) -> Path:
    """Summary tables, convergence diagnostics and SVG plots for finished chains."""
    chains = load_chains(chains_dir)
    manifest = json.loads((Path(chains_dir) / "chains_manifest.json").read_text())
    if config is None and "config" in manifest:
        from .config import parse_run_config

        config = parse_run_config(manifest["config"])
    model = LikelihoodModel.load(Path(chains_dir) / "likelihood.json")
    measured = load_measurements(measurements_dir)
    report_dir = out_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)

    names = list(chains[0].names)
    stats = summarize(chains)
    rhat: dict[str, float] | None = None
    notes = []
    if len(chains) >= 2:
        rhat = {n: gelman_rubin(chains, n) for n in names}
    else:
        notes.append("Gelman-Rubin diagnostic skipped: it requires >= 2 chains.")

    true_moments = config.true_moments() if config is not None else None
    prior_moments = None
    if config is not None and config.prior_bounds is not None:
        prior_moments = {
            n: ((lo + hi) / 2.0, (hi - lo) / np.sqrt(12.0))
            for n, (lo, hi) in config.prior_bounds.items()
        }

    header = ["parameter", "true_mean", "true_sd", "prior_mean", "prior_sd",
              "posterior_mean", "posterior_sd", "ci95_low", "ci95_high"]
    if rhat is not None:
        header.append("rhat")
    rows = []
    for n in names:
        s = stats.params[n]
        row = ([n] + _moment_columns(true_moments, n) + _moment_columns(prior_moments, n)
               + [s.mean, s.sd, s.ci[0], s.ci[1]])
        if rhat is not None:
            row.append(rhat[n])
        rows.append(row)
    atomic_write_text(report_dir / "summary.csv", csv_text(header, rows))

    # measured vs posterior-predictive fits per amplitude level
    predictive = posterior_predictive(model, chains, count=100)
    kind = model.densities[0].kind
    comparisons = compare_slices(measured, predictive, model.grid, kind)
    fit_names, _ = _fit_columns(comparisons[0].measured)
    comp_header = (["level_m"] + [f"measured_{c}" for c in fit_names]
                   + [f"predicted_{c}" for c in fit_names])
    comp_rows = []
    for comp in comparisons:
        _, mv = _fit_columns(comp.measured)
        _, pv = _fit_columns(comp.predicted)
        comp_rows.append([comp.level] + mv + pv)
    atomic_write_text(report_dir / "level_fits.csv", csv_text(comp_header, comp_rows))

    report = {
        "parameters": names,
        "iterations": len(chains[0]),
        "n_chains": len(chains),
        "acceptance_rates": [acceptance_rate(c) for c in chains],
        "gelman_rubin": rhat,
        "notes": notes,
        "summary": {
            n: {"mean": stats.params[n].mean, "sd": stats.params[n].sd,
                "ci95": list(stats.params[n].ci)}
            for n in names
        },
    }
    atomic_write_json(report_dir / "report.json", report)

    plots = config.plots if config is not None else True
    if plots:
        pooled = np.concatenate([c.post_burn_in for c in chains], axis=0)
        for j, n in enumerate(names):
            _svg.trace_svg(chains[0].samples[:, j], n, chains[0].burn_in,
                           report_dir / f"trace_{n}.svg")
        _svg.scatter_matrix_svg(pooled, names, report_dir / "scatter_matrix.svg")
        _svg.backbone_bands_svg(measured.curves, predictive.curves,
                                report_dir / "backbone_bands.svg")
        _svg.pdf_overlays_svg(comparisons, report_dir / "pdf_levels.svg")

    for line in notes:
        print(line)
    print(f"report written to {report_dir}")
    return report_dir


def cmd_pipeline(config: RunConfig, out_dir: Path, workers: int | None) -> None:
    meas_dir = cmd_generate(config, out_dir)
    chains_dir = cmd_sample(config, out_dir, measurements_dir=meas_dir, workers=workers)
    cmd_report(chains_dir, meas_dir, out_dir, config=config)


# ---------------------------------------------------------------------------
# argument parsing

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="backbonemc",
        description="Stochastic nonlinear model updating from backbone curves.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="JSON run config (or a manifest embedding one)")
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("generate", help="simulate a synthetic measurement set")
    add_common(p)
    p.add_argument("--seed", type=int, default=None, help="override ensemble seed")

    p = sub.add_parser("extract", help="time-series CSV (t,x) -> backbone CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-amplitude", type=float, default=None)

    p = sub.add_parser("build-likelihood", help="fit slice densities from measurements")
    add_common(p)
    p.add_argument("--measurements", required=True)

    p = sub.add_parser("sample", help="run Metropolis-Hastings chains")
    add_common(p)
    p.add_argument("--measurements", default=None)
    p.add_argument("--likelihood", default=None)
    p.add_argument("--chains", type=int, default=None, help="override chain count")
    p.add_argument("--seed", type=int, default=None, help="override base seed")
    p.add_argument("--threads", type=int, default=None,
                   help="parallel chain processes (default: available cores)")

    p = sub.add_parser("report", help="summaries, diagnostics and SVG plots")
    p.add_argument("--chains", dest="chains_dir", required=True)
    p.add_argument("--measurements", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)

    p = sub.add_parser("pipeline", help="generate + sample + report")
    add_common(p)
    p.add_argument("--chains", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    return parser


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    raw = json.loads(json.dumps(config.raw))  # deep copy
    if getattr(args, "seed", None) is not None:
        if args.command == "generate":
            raw.setdefault("true_distribution", {})["seed"] = args.seed
        else:
            raw.setdefault("mcmc", {})["seed"] = args.seed
            raw["mcmc"].pop("seeds", None)
    if getattr(args, "chains", None) is not None and args.command in ("sample", "pipeline"):
        raw.setdefault("mcmc", {})["chains"] = args.chains
        if "seeds" in raw["mcmc"] and len(raw["mcmc"]["seeds"]) != args.chains:
            base = raw["mcmc"]["seeds"][0]
            raw["mcmc"].pop("seeds")
            raw["mcmc"]["seed"] = base
    if getattr(args, "out", None):
        raw.setdefault("output", {})["directory"] = args.out
    from .config import parse_run_config

    return parse_run_config(raw)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "extract":
            cmd_extract(Path(args.input), Path(args.out), args.min_amplitude)
            return 0
        if args.command == "report":
            config = load_run_config(args.config) if args.config else None
            chains_dir = Path(args.chains_dir)
            out_dir = Path(args.out) if args.out else chains_dir.parent
            cmd_report(chains_dir, Path(args.measurements), out_dir, config=config)
            return 0

        config = _apply_overrides(load_run_config(args.config), args)
        out_dir = Path(args.out) if args.out else Path(config.out_dir)
        if args.command == "generate":
            cmd_generate(config, out_dir)
        elif args.command == "build-likelihood":
            cmd_build_likelihood(config, Path(args.measurements),
                                 out_dir / "likelihood.json")
        elif args.command == "sample":
            cmd_sample(
                config, out_dir,
                measurements_dir=Path(args.measurements) if args.measurements else None,
                likelihood_path=Path(args.likelihood) if args.likelihood else None,
                workers=args.threads,
            )
        elif args.command == "pipeline":
            cmd_pipeline(config, out_dir, workers=args.threads)
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
