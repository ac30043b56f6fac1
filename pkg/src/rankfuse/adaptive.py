"""Regime-probing pruner: classify the sparsity regime, then prune with it.

Three reduced-budget weight searches (monotone anchor, smoothed-envelope
class, raw class) estimate proxy accuracies; the threshold decision tree
picks the regime; the winning class is re-searched at full budget and its
selection returned. Held-out data never feeds the decision.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .analysis import DEFAULT_THRESHOLDS, regime_verdict
from .core import ModelProfile, Seed, Selection, Sparsity
from .dbo import OptimizerConfig
from .errors import BudgetInfeasibleError
from .features import FeatureSpec
from .oracle import OracleSession
from .ranknorm import allocate_budgets
from .search import SearchOutcome, build_scorer, derive_seed, search_weights
from .variants import builtin_variants

__all__ = ["AdaptiveConfig", "ProbeReport", "adaptive_prune"]

_CLASS_ORDER = ("plateau", "envelope", "raw")
_VERDICT_TO_CLASS = {"kappa0": "plateau", "kappa1": "envelope", "kappa2": "raw"}


def _default_class_specs() -> dict[str, tuple[FeatureSpec, ...]]:
    registry = builtin_variants()
    return {
        "plateau": registry["V1a"].specs,
        "envelope": registry["V1"].specs,
        "raw": registry["A5"].specs,
    }


@dataclass(frozen=True)
class AdaptiveConfig:
    thresholds: tuple[float, float] = DEFAULT_THRESHOLDS
    probe_budget: OptimizerConfig = OptimizerConfig(population=10, iterations=5)
    full_budget: OptimizerConfig = OptimizerConfig(population=50, iterations=40)
    class_specs: Mapping[str, tuple[FeatureSpec, ...]] = field(
        default_factory=_default_class_specs
    )
    epsilon_taylor: float = 1e-12
    evaluate_heldout: bool = False

    def __post_init__(self) -> None:
        probe = self.probe_budget.population * (self.probe_budget.iterations + 1)
        full = self.full_budget.population * (self.full_budget.iterations + 1)
        if probe > full:
            raise ValueError("probe budget must not exceed the full budget")
        if any(t <= 0 for t in self.thresholds):
            raise ValueError("thresholds must be positive")
        missing = set(_CLASS_ORDER) - set(self.class_specs)
        if missing:
            raise ValueError(f"class_specs missing {sorted(missing)}")


@dataclass(frozen=True)
class ProbeReport:
    probe_accuracies: Mapping[str, float]
    delta_env: float
    delta_raw: float
    kappa_hat: str
    chosen_class: str
    probe_evaluations: int
    full_evaluations: int
    heldout_accuracy: float | None = None

    @property
    def total_evaluations(self) -> int:
        extra = 1 if self.heldout_accuracy is not None else 0
        return self.probe_evaluations + self.full_evaluations + extra

    def to_dict(self) -> dict:
        return {
            "probe_accuracies": dict(self.probe_accuracies),
            "delta_env": self.delta_env,
            "delta_raw": self.delta_raw,
            "kappa_hat": self.kappa_hat,
            "chosen_class": self.chosen_class,
            "probe_evaluations": self.probe_evaluations,
            "full_evaluations": self.full_evaluations,
            "heldout_accuracy": self.heldout_accuracy,
            "total_evaluations": self.total_evaluations,
        }


def adaptive_prune(
    session: OracleSession,
    profile: ModelProfile,
    s: Sparsity,
    config: AdaptiveConfig = AdaptiveConfig(),
    seed: Seed = Seed(0),
) -> tuple[str, Selection, ProbeReport]:
    """Probe the three scorer classes, branch on the gaps, prune accordingly."""
    budgets = allocate_budgets(profile, s)  # raises BudgetInfeasibleError early
    if budgets.total() <= 0:
        raise BudgetInfeasibleError("empty keep budget")

    probe_acc: dict[str, float] = {}
    probe_evals = 0
    for class_name in _CLASS_ORDER:
        scorer = build_scorer(
            profile, config.class_specs[class_name], seed, config.epsilon_taylor
        )
        probe_cfg = OptimizerConfig(
            population=config.probe_budget.population,
            iterations=config.probe_budget.iterations,
            bounds=config.probe_budget.bounds,
            seed=derive_seed("probe", class_name, s.value, seed.value),
        )
        outcome = search_weights(scorer, budgets, session, probe_cfg)
        probe_acc[class_name] = outcome.proxy_accuracy
        probe_evals += outcome.evaluations

    delta_env = probe_acc["envelope"] - probe_acc["plateau"]
    delta_raw = probe_acc["raw"] - probe_acc["envelope"]
    kappa_hat = regime_verdict(delta_env, delta_raw, config.thresholds)
    chosen = _VERDICT_TO_CLASS[kappa_hat]

    scorer = build_scorer(profile, config.class_specs[chosen], seed, config.epsilon_taylor)
    full_cfg = OptimizerConfig(
        population=config.full_budget.population,
        iterations=config.full_budget.iterations,
        bounds=config.full_budget.bounds,
        seed=derive_seed("full", chosen, s.value, seed.value),
    )
    final: SearchOutcome = search_weights(scorer, budgets, session, full_cfg)

    heldout = None
    if config.evaluate_heldout:
        heldout = session.evaluate(final.selection, split="heldout").accuracy

    report = ProbeReport(
        probe_accuracies=probe_acc,
        delta_env=delta_env,
        delta_raw=delta_raw,
        kappa_hat=kappa_hat,
        chosen_class=chosen,
        probe_evaluations=probe_evals,
        full_evaluations=final.evaluations,
        heldout_accuracy=heldout,
    )
    return kappa_hat, final.selection, report
