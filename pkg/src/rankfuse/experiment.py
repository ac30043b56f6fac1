"""Grid runner with resumable JSONL persistence and report emission.

A run walks (variant, sparsity, seed) cells in a fixed order, searches the
fusion weights on the proxy split, evaluates the final selection held-out,
and appends one record per cell. Records are append-only; a rerun skips
every cell already completed. Analysis is a pure function of the records
and the class map: cell statistics, plateau stats, regime reports, aligned
text tables, and a plot-ready CSV.
"""
from __future__ import annotations

import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .analysis import CellStats, RegimeReport, build_regime_report, plateau_stats
from .core import ModelProfile, Seed, Sparsity, load_profile
from .dbo import OptimizerConfig
from .errors import ConfigError, OracleError, TooFewError
from .features import FeatureSpec
from .fusion import EPSILON_TAYLOR, FusionWeights, select_topk
from .oracle import OracleSession, open_oracle
from .ranknorm import allocate_budgets
from .search import build_scorer, derive_seed, search_weights
from .variants import Variant, builtin_variants, default_class_map

__all__ = [
    "SCHEMA_VERSION",
    "ExperimentConfig",
    "RunSummary",
    "AnalysisReport",
    "load_records",
    "run_experiment",
    "analyze_results",
    "cells_from_records",
]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    variants: tuple[Variant, ...]
    sparsities: tuple[float, ...]
    seeds: tuple[int, ...]
    oracle: str = "surrogate"
    profile_path: str | None = None
    surrogate_params: Mapping = field(default_factory=dict)
    dbo: OptimizerConfig = OptimizerConfig()
    epsilon_taylor: float = EPSILON_TAYLOR
    timeout: float = 600.0
    output: str = "results.jsonl"
    class_map: Mapping | None = None

    def __post_init__(self) -> None:
        if not self.variants or not self.sparsities or not self.seeds:
            raise ConfigError("variants, sparsities, and seeds must be nonempty")
        for s in self.sparsities:
            if not (0.0 < s < 1.0):
                raise ConfigError(f"sparsity {s} outside (0, 1)")

    @classmethod
    def from_document(cls, doc: Mapping, base_dir: Path | None = None) -> "ExperimentConfig":
        try:
            registry = builtin_variants()
            variants = []
            for entry in doc["variants"]:
                if isinstance(entry, str):
                    if entry not in registry:
                        raise ConfigError(f"unknown builtin variant {entry!r}")
                    variants.append(registry[entry])
                else:
                    variants.append(
                        Variant(
                            name=entry["name"],
                            kappa_class=entry.get("kappa_class", "control"),
                            specs=tuple(
                                FeatureSpec.from_dict(d) for d in entry["features"]
                            ),
                        )
                    )
            dbo_doc = doc.get("dbo", {})
            dbo = OptimizerConfig(
                population=int(dbo_doc.get("population", 50)),
                iterations=int(dbo_doc.get("iterations", 40)),
                bounds=tuple(dbo_doc.get("bounds", (-40.0, 40.0))),
            )
            profile_path = doc.get("profile")
            if profile_path is not None and base_dir is not None:
                profile_path = str((base_dir / profile_path).resolve())
            output = doc.get("output", "results.jsonl")
            if base_dir is not None:
                output = str((base_dir / output).resolve())
            return cls(
                variants=tuple(variants),
                sparsities=tuple(float(s) for s in doc["sparsities"]),
                seeds=tuple(int(s) for s in doc["seeds"]),
                oracle=doc.get("oracle", "surrogate"),
                profile_path=profile_path,
                surrogate_params=doc.get("surrogate", {}),
                dbo=dbo,
                epsilon_taylor=float(doc.get("epsilon_taylor", EPSILON_TAYLOR)),
                timeout=float(doc.get("timeout", 600.0)),
                output=output,
                class_map=doc.get("class_map"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad experiment config: {exc}")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_document(json.load(fh), base_dir=path.parent)


@dataclass
class RunSummary:
    completed: int = 0
    skipped: int = 0
    failed: int = 0
    evaluations: int = 0

    @property
    def exit_code(self) -> int:
        return 2 if self.failed else 0


def _record_key(rec: Mapping) -> tuple:
    return (rec["variant"], float(rec["sparsity"]), int(rec["seed"]))


def load_records(path) -> list[dict]:
    """All record lines from a results file (meta lines skipped)."""
    records = []
    path = Path(path)
    if not path.exists():
        return records
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            if doc.get("type") == "record":
                records.append(doc)
    return records


class _ResultsWriter:
    """Single-writer append discipline for the results file."""

    def __init__(self, path: Path):
        self._path = path
        self._lock = threading.Lock()
        if not path.exists() or path.stat().st_size == 0:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(json.dumps({"type": "meta", "schema_version": SCHEMA_VERSION}) + "\n")

    def append(self, record: Mapping) -> None:
        line = json.dumps(record, sort_keys=True)
        with self._lock:
            with open(self._path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")


def _resolve_profile(config: ExperimentConfig) -> ModelProfile:
    if config.profile_path is not None:
        return load_profile(config.profile_path)
    if config.oracle == "surrogate":
        raise ConfigError("surrogate oracle requires a profile path")
    with open_oracle(config.oracle, timeout=config.timeout) as session:
        return session.profile()


def _run_cell(
    profile: ModelProfile,
    variant: Variant,
    sparsity: float,
    seed: int,
    config: ExperimentConfig,
    session: OracleSession,
) -> dict:
    started = time.perf_counter()
    record = {
        "type": "record",
        "schema_version": SCHEMA_VERSION,
        "variant": variant.name,
        "sparsity": sparsity,
        "seed": seed,
    }
    try:
        budgets = allocate_budgets(profile, Sparsity(sparsity))
        scorer = build_scorer(profile, variant.specs, Seed(seed), config.epsilon_taylor)
        if variant.specs:
            dbo_cfg = OptimizerConfig(
                population=config.dbo.population,
                iterations=config.dbo.iterations,
                bounds=config.dbo.bounds,
                seed=derive_seed("cell", variant.name, sparsity, seed),
            )
            outcome = search_weights(scorer, budgets, session, dbo_cfg)
            weights, proxy_acc = outcome.weights, outcome.proxy_accuracy
            selection, evaluations = outcome.selection, outcome.evaluations
        else:
            # bare backbone: fixed unit exponent, a single proxy evaluation
            weights = FusionWeights(w_t=1.0, bounds=config.dbo.bounds)
            selection = select_topk(scorer.score(weights), budgets)
            proxy_acc = session.evaluate(selection, split="proxy").accuracy
            evaluations = 1
        heldout = session.evaluate(selection, split="heldout").accuracy
        record.update(
            status="ok",
            proxy_acc=proxy_acc,
            heldout_acc=heldout,
            weights={"w_t": weights.w_t, "w": list(weights.w)},
            evaluations=evaluations + 1,
            timing_ms=(time.perf_counter() - started) * 1000.0,
        )
    except OracleError as exc:
        record.update(
            status="error",
            error=f"{type(exc).__name__}: {exc}",
            timing_ms=(time.perf_counter() - started) * 1000.0,
        )
    return record


def run_experiment(config: ExperimentConfig, resume: bool = True, jobs: int = 1) -> RunSummary:
    """Execute the grid; returns completion counts and the exit code."""
    profile = _resolve_profile(config)
    out_path = Path(config.output)
    done: set[tuple] = set()
    if resume:
        for rec in load_records(out_path):
            if rec.get("status") == "ok":
                done.add(_record_key(rec))
    writer = _ResultsWriter(out_path)

    cells = [
        (variant, sparsity, seed)
        for variant in config.variants
        for sparsity in config.sparsities
        for seed in config.seeds
    ]
    summary = RunSummary()

    def make_session() -> OracleSession:
        return open_oracle(
            config.oracle,
            profile=profile,
            surrogate_params=config.surrogate_params,
            timeout=config.timeout,
        )

    def handle(record: dict) -> None:
        writer.append(record)
        if record["status"] == "ok":
            summary.completed += 1
            summary.evaluations += record["evaluations"]
        else:
            summary.failed += 1

    pending = [c for c in cells if (c[0].name, float(c[1]), int(c[2])) not in done]
    summary.skipped = len(cells) - len(pending)

    if jobs <= 1:
        with make_session() as session:
            for variant, sparsity, seed in pending:
                handle(_run_cell(profile, variant, sparsity, seed, config, session))
    else:
        local = threading.local()

        def worker(cell):
            if not hasattr(local, "session"):
                local.session = make_session()
            variant, sparsity, seed = cell
            return _run_cell(profile, variant, sparsity, seed, config, local.session)

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for record in pool.map(worker, pending):
                handle(record)
    return summary


# ------------------------------------------------------------------ analysis

@dataclass(frozen=True)
class AnalysisReport:
    cells: tuple[CellStats, ...]
    plateau: Mapping[float, tuple[float, float]]  # S -> (height, spread)
    regimes: tuple[RegimeReport, ...]
    warnings: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "cells": [
                {
                    "variant": c.variant,
                    "sparsity": c.sparsity,
                    "mean": c.mean,
                    "std": c.std,
                    "per_seed": [list(row) for row in c.per_seed],
                }
                for c in self.cells
            ],
            "plateau": {
                str(s): {"height": h, "spread": spread}
                for s, (h, spread) in self.plateau.items()
            },
            "regimes": [r.to_dict() for r in self.regimes],
            "warnings": list(self.warnings),
        }


def cells_from_records(records: Sequence[Mapping]) -> list[CellStats]:
    """Group ok records into per-(variant, sparsity) seed-aggregated cells."""
    grouped: dict[tuple[str, float], list[tuple[int, float, float]]] = {}
    for rec in records:
        if rec.get("status") != "ok":
            continue
        key = (rec["variant"], float(rec["sparsity"]))
        grouped.setdefault(key, []).append(
            (int(rec["seed"]), float(rec["heldout_acc"]), float(rec["proxy_acc"]))
        )
    cells = []
    for (variant, sparsity), rows in sorted(grouped.items()):
        rows.sort()
        cells.append(CellStats.from_seed_rows(variant, sparsity, rows))
    return cells


def _group(cells: Sequence[CellStats]) -> dict[float, dict[str, CellStats]]:
    by_s: dict[float, dict[str, CellStats]] = {}
    for c in cells:
        by_s.setdefault(c.sparsity, {})[c.variant] = c
    return by_s


def analyze_results(
    records: Sequence[Mapping],
    class_map: Mapping | None = None,
) -> AnalysisReport:
    """Pure aggregation of records into plateau stats and regime reports."""
    cells = cells_from_records(records)
    if not cells:
        raise TooFewError("no completed records to analyze")
    variants = sorted({c.variant for c in cells})
    cmap = dict(class_map) if class_map else default_class_map(tuple(variants))
    anchor = cmap.get("anchor") or ""
    kappa0 = list(cmap.get("kappa0", []))
    kappa1 = list(cmap.get("kappa1", []))
    kappa2 = list(cmap.get("kappa2", []))

    warnings: list[str] = []
    by_s = _group(cells)
    sparsities = sorted(by_s)
    for s in sparsities:
        missing = sorted(set(variants) - set(by_s[s]))
        if missing:
            warnings.append(f"sparsity {s:g}: missing cells for {missing}")
    seed_counts = {len(c.per_seed) for c in cells}
    if len(seed_counts) > 1:
        warnings.append(f"uneven seed counts across cells: {sorted(seed_counts)}")

    plateau: dict[float, tuple[float, float]] = {}
    regimes: list[RegimeReport] = []
    for s in sparsities:
        cell_map = by_s[s]
        monotone = [cell_map[v] for v in [anchor, *kappa0] if v in cell_map]
        if len(monotone) >= 2:
            plateau[s] = plateau_stats(monotone)
        else:
            warnings.append(
                f"sparsity {s:g}: plateau stats skipped "
                f"({len(monotone)} rank-monotone variant(s))"
            )
        anchor_cell = cell_map.get(anchor)
        k0 = [cell_map[v] for v in kappa0 if v in cell_map]
        k1 = [cell_map[v] for v in kappa1 if v in cell_map]
        k2 = [cell_map[v] for v in kappa2 if v in cell_map]
        if anchor_cell is not None and k1 and k2:
            regimes.append(build_regime_report(s, anchor_cell, k0, k1, k2))
        else:
            warnings.append(f"sparsity {s:g}: regime report skipped (incomplete classes)")

    return AnalysisReport(
        cells=tuple(cells),
        plateau=plateau,
        regimes=tuple(regimes),
        warnings=tuple(warnings),
    )


# ----------------------------------------------------------------- rendering

def render_tables(report: AnalysisReport) -> str:
    """Aligned text tables: cell means, plateau stats, regime verdicts."""
    lines: list[str] = []
    variants = sorted({c.variant for c in report.cells})
    by_s = _group(report.cells)
    sparsities = sorted(by_s)

    width = max(12, max(len(v) for v in variants) + 2)
    lines.append("== cell means (held-out, mean +/- sample std over seeds) ==")
    header = "S".ljust(6) + "".join(v.rjust(width) for v in variants)
    lines.append(header)
    for s in sparsities:
        row = f"{s:<6g}"
        for v in variants:
            cell = by_s[s].get(v)
            row += (f"{cell.mean:.4f}~{cell.std:.4f}" if cell else "-").rjust(width)
        lines.append(row)

    lines.append("")
    lines.append("== plateau (rank-monotone variants) ==")
    lines.append("S".ljust(6) + "height".rjust(10) + "spread".rjust(10))
    for s, (height, spread) in sorted(report.plateau.items()):
        lines.append(f"{s:<6g}" + f"{height:.4f}".rjust(10) + f"{spread:.4f}".rjust(10))

    lines.append("")
    lines.append("== regime verdicts ==")
    lines.append(
        "S".ljust(6)
        + "plateau".rjust(10)
        + "d_k0".rjust(9)
        + "d_k1".rjust(9)
        + "d_k2".rjust(9)
        + "premium".rjust(9)
        + "  verdict"
    )
    for r in report.regimes:
        lines.append(
            f"{r.sparsity:<6g}"
            + f"{r.plateau:.4f}".rjust(10)
            + f"{r.deltas.get('kappa0', float('nan')):+.3f}".rjust(9)
            + f"{r.deltas['kappa1']:+.3f}".rjust(9)
            + f"{r.deltas['kappa2']:+.3f}".rjust(9)
            + f"{r.wiggle_premium:+.3f}".rjust(9)
            + f"  {r.verdict}"
            + (f"  [{', '.join(r.diagnostics)}]" if r.diagnostics else "")
        )
    if report.warnings:
        lines.append("")
        lines.append("== warnings ==")
        lines.extend(f"- {w}" for w in report.warnings)
    return "\n".join(lines) + "\n"


def render_plot_csv(report: AnalysisReport) -> str:
    rows = ["sparsity,variant,mean,std"]
    for c in sorted(report.cells, key=lambda c: (c.sparsity, c.variant)):
        rows.append(f"{c.sparsity:g},{c.variant},{c.mean:.10g},{c.std:.10g}")
    return "\n".join(rows) + "\n"


def write_analysis(report: AnalysisReport, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.json",
        "tables": out / "tables.txt",
        "plot": out / "plot.csv",
    }
    paths["report"].write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    paths["tables"].write_text(render_tables(report), encoding="utf-8")
    paths["plot"].write_text(render_plot_csv(report), encoding="utf-8")
    return paths
