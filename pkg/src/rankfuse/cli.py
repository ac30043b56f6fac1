"""Command-line surface: validation, feature export, search, pruning,
experiment grids, regime probing, and shape complexity.

Exit codes: 0 success, 1 configuration or input error, 2 the run completed
but some cells recorded failures.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import adaptive as adaptive_mod
from .analysis import chebyshev_error_curve, kappa_from_errors
from .core import Seed, Sparsity, load_profile
from .dbo import OptimizerConfig
from .errors import ConfigError, ProfileError, RankfuseError
from .experiment import (
    ExperimentConfig,
    analyze_results,
    load_records,
    run_experiment,
    write_analysis,
)
from .features import FeatureSpec, build_feature_matrix, feature_shape
from .fusion import FusionWeights, select_topk
from .oracle import open_oracle
from .ranknorm import allocate_budgets, rank_grid, rank_mm
from .search import build_scorer, derive_seed, search_weights
from .variants import builtin_variants

_SURROGATE_DEFAULTS = {"seed": 0}


def _variant_specs(name: str) -> tuple[FeatureSpec, ...]:
    registry = builtin_variants()
    if name not in registry:
        raise ConfigError(
            f"unknown variant {name!r}; builtins: {', '.join(sorted(registry))}"
        )
    return registry[name].specs


def _open_session(oracle: str, profile, surrogate_json: str | None, timeout: float):
    params = dict(_SURROGATE_DEFAULTS)
    if surrogate_json:
        params.update(json.loads(surrogate_json))
    return open_oracle(oracle, profile=profile, surrogate_params=params, timeout=timeout)


@click.group()
def main() -> None:
    """Rank-normalized fusion scoring, pruning, and plateau analysis."""


# ---------------------------------------------------------------- profile

@main.group()
def profile() -> None:
    """Profile document operations."""


@profile.command("validate")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
def profile_validate(path: str) -> None:
    """Validate a profile JSON document."""
    try:
        prof = load_profile(path)
    except (ProfileError, json.JSONDecodeError) as exc:
        click.echo(f"invalid: {type(exc).__name__}: {exc}", err=True)
        sys.exit(1)
    click.echo(
        f"ok: {len(prof.layers)} layers, {prof.total_channels} channels "
        f"({', '.join(prof.layer_ids[:6])}{'...' if len(prof.layers) > 6 else ''})"
    )


# ---------------------------------------------------------------- features

@main.group()
def features() -> None:
    """Feature matrix operations."""


@features.command("emit")
@click.option("--profile", "profile_path", required=True, type=click.Path(exists=True))
@click.option("--variant", required=True, help="builtin variant name")
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path())
@click.option("--format", "fmt", default="csv", type=click.Choice(["csv", "json"]), show_default=True)
def features_emit(profile_path, variant, seed, out, fmt) -> None:
    """Emit a variant's feature matrix (rows follow profile layer order)."""
    prof = load_profile(profile_path)
    specs = _variant_specs(variant)
    if not specs:
        raise ConfigError(f"variant {variant!r} has no feature columns")
    matrix = build_feature_matrix(prof, rank_mm(prof), list(specs), Seed(seed))
    out_path = Path(out)
    if fmt == "csv":
        lines = [",".join(matrix.names)]
        for row in matrix.values:
            lines.append(",".join(f"{v:.17g}" for v in row))
        out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        doc = {
            "names": list(matrix.names),
            "layers": {
                lid: matrix.layer_block(lid).tolist() for lid in matrix.layer_ids
            },
        }
        out_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    click.echo(f"wrote {matrix.values.shape[0]}x{matrix.values.shape[1]} matrix to {out_path}")


# ------------------------------------------------------------------ search

@main.command("search")
@click.option("--profile", "profile_path", required=True, type=click.Path(exists=True))
@click.option("--variant", required=True)
@click.option("--sparsity", required=True, type=float)
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--oracle", default="surrogate", show_default=True)
@click.option("--surrogate-params", default=None, help="JSON overrides for the surrogate")
@click.option("--population", default=50, show_default=True, type=int)
@click.option("--iterations", default=40, show_default=True, type=int)
@click.option("--timeout", default=600.0, show_default=True, type=float)
@click.option("--out", required=True, type=click.Path())
def search_cmd(profile_path, variant, sparsity, seed, oracle, surrogate_params,
               population, iterations, timeout, out) -> None:
    """Search fusion weights on the proxy split; write weights JSON."""
    prof = load_profile(profile_path)
    specs = _variant_specs(variant)
    scorer = build_scorer(prof, specs, Seed(seed))
    budgets = allocate_budgets(prof, Sparsity(sparsity))
    cfg = OptimizerConfig(
        population=population,
        iterations=iterations,
        seed=derive_seed("cli-search", variant, sparsity, seed),
    )
    with _open_session(oracle, prof, surrogate_params, timeout) as session:
        outcome = search_weights(scorer, budgets, session, cfg)
    doc = {
        "variant": variant,
        "sparsity": sparsity,
        "seed": seed,
        "w_t": outcome.weights.w_t,
        "w": list(outcome.weights.w),
        "proxy_accuracy": outcome.proxy_accuracy,
        "evaluations": outcome.evaluations,
    }
    Path(out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    click.echo(
        f"best proxy accuracy {outcome.proxy_accuracy:.4f} "
        f"after {outcome.evaluations} evaluations -> {out}"
    )


# ------------------------------------------------------------------- prune

@main.command("prune")
@click.option("--profile", "profile_path", required=True, type=click.Path(exists=True))
@click.option("--variant", required=True)
@click.option("--sparsity", required=True, type=float)
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--weights-file", default=None, type=click.Path(exists=True),
              help="weights JSON from `search`; defaults to unit exponents")
@click.option("--out", required=True, type=click.Path())
def prune_cmd(profile_path, variant, sparsity, seed, weights_file, out) -> None:
    """Write the kept-channel selection (plus 0/1 masks) as JSON."""
    prof = load_profile(profile_path)
    specs = _variant_specs(variant)
    scorer = build_scorer(prof, specs, Seed(seed))
    if weights_file:
        wdoc = json.loads(Path(weights_file).read_text(encoding="utf-8"))
        weights = FusionWeights(w_t=float(wdoc["w_t"]), w=tuple(wdoc["w"]))
    else:
        weights = FusionWeights(w_t=1.0, w=(1.0,) * len(specs))
    budgets = allocate_budgets(prof, Sparsity(sparsity))
    selection = select_topk(scorer.score(weights), budgets)
    doc = selection.to_document()
    doc["masks"] = {lid: m.tolist() for lid, m in selection.masks(prof).items()}
    Path(out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    click.echo(f"kept {selection.total_kept()} of {prof.total_channels} channels -> {out}")


# -------------------------------------------------------------- experiment

@main.group()
def experiment() -> None:
    """Grid execution and analysis."""


@experiment.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--resume/--no-resume", default=True, show_default=True)
@click.option("--jobs", default=1, show_default=True, type=int)
def experiment_run(config_path, resume, jobs) -> None:
    """Run the (variant x sparsity x seed) grid from a config file."""
    config = ExperimentConfig.from_file(config_path)
    summary = run_experiment(config, resume=resume, jobs=jobs)
    click.echo(
        f"completed {summary.completed}, skipped {summary.skipped}, "
        f"failed {summary.failed}, oracle evaluations {summary.evaluations}"
    )
    sys.exit(summary.exit_code)


@experiment.command("analyze")
@click.option("--results", "results_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--class-map", "class_map_path", default=None, type=click.Path(exists=True))
def experiment_analyze(results_path, out_dir, class_map_path) -> None:
    """Aggregate a results file into reports, tables, and plot CSV."""
    records = load_records(results_path)
    class_map = None
    if class_map_path:
        class_map = json.loads(Path(class_map_path).read_text(encoding="utf-8"))
    report = analyze_results(records, class_map)
    paths = write_analysis(report, out_dir)
    for warning in report.warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(f"wrote {', '.join(str(p) for p in paths.values())}")


# ---------------------------------------------------------------- adaptive

@main.command("adaptive")
@click.option("--profile", "profile_path", required=True, type=click.Path(exists=True))
@click.option("--sparsity", required=True, type=float)
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--oracle", default="surrogate", show_default=True)
@click.option("--surrogate-params", default=None)
@click.option("--probe-population", default=10, show_default=True, type=int)
@click.option("--probe-iterations", default=5, show_default=True, type=int)
@click.option("--timeout", default=600.0, show_default=True, type=float)
@click.option("--heldout/--no-heldout", default=True, show_default=True)
@click.option("--out", required=True, type=click.Path())
def adaptive_cmd(profile_path, sparsity, seed, oracle, surrogate_params,
                 probe_population, probe_iterations, timeout, heldout, out) -> None:
    """Probe the regime, prune with the winning scorer class."""
    prof = load_profile(profile_path)
    config = adaptive_mod.AdaptiveConfig(
        probe_budget=OptimizerConfig(population=probe_population, iterations=probe_iterations),
        evaluate_heldout=heldout,
    )
    with _open_session(oracle, prof, surrogate_params, timeout) as session:
        kappa_hat, selection, report = adaptive_mod.adaptive_prune(
            session, prof, Sparsity(sparsity), config, Seed(seed)
        )
    doc = {
        "type": "adaptive",
        "sparsity": sparsity,
        "seed": seed,
        "kappa_hat": kappa_hat,
        "selection": selection.to_document(),
        "probe_report": report.to_dict(),
    }
    out_path = Path(out)
    with open(out_path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, sort_keys=True) + "\n")
    click.echo(
        f"kappa_hat={kappa_hat} chosen={report.chosen_class} "
        f"evaluations={report.total_evaluations} -> {out_path}"
    )


# ------------------------------------------------------------------- kappa

@main.command("kappa")
@click.option("--variant", default=None, help="builtin variant: analyze each column shape")
@click.option("--shape-csv", default=None, type=click.Path(exists=True),
              help="one column of phi values on a uniform [0.1, 1.0] grid")
@click.option("--epsilon", default=0.05, show_default=True, type=float)
@click.option("--d-max", default=256, show_default=True, type=int)
@click.option("--grid", default=4096, show_default=True, type=int)
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--normalize/--no-normalize", default=True, show_default=True,
              help="min-max scale shapes to [0, 1] so epsilon is amplitude-relative")
def kappa_cmd(variant, shape_csv, epsilon, d_max, grid, seed, normalize) -> None:
    """Rank-space shape complexity via the power-of-two expansion sweep."""
    shapes: list[tuple[str, np.ndarray]] = []
    if shape_csv:
        values = np.loadtxt(shape_csv, delimiter=",")
        shapes.append((Path(shape_csv).name, np.atleast_1d(values)))
    elif variant:
        specs = _variant_specs(variant)
        ranks = rank_grid(grid)
        for spec in specs:
            shapes.append((spec.name, feature_shape(spec, ranks, Seed(seed))))
    else:
        raise ConfigError("pass --variant or --shape-csv")
    for name, phi in shapes:
        if normalize:
            span = float(phi.max() - phi.min())
            phi = (phi - phi.min()) / span if span > 0 else phi - phi.min()
        errors = chebyshev_error_curve(phi, d_max)
        kappa, d = kappa_from_errors(errors, epsilon)
        click.echo(f"{name}: kappa={kappa:g} (D={d}, epsilon={epsilon:g})")


def run() -> None:  # console-script entry with uniform error handling
    try:
        main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.Abort:
        sys.exit(1)
    except (RankfuseError, json.JSONDecodeError) as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    run()
