"""Box-bounded dung beetle optimizer for the fusion-weight search.

Five-phase population update per the originally published algorithm:
ball-rolling beetles steer off the population worst (or dance on the spot
when blocked), brood balls hatch inside a spawning region that shrinks
around the iteration best, foragers explore around the global best, and
thieves jump between the two bests. Subpopulation proportions 6:6:7:11 of
30, greedy one-to-one survivor selection, clamp-to-bounds projection.

All random draws for an iteration are taken from a single seeded generator
before any fitness call, so results are reproducible bit-for-bit no matter
how the fitness evaluations are scheduled.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Seed

__all__ = ["OptimizerConfig", "SearchResult", "optimize"]

_K_DEFLECT = 0.1
_B_ROLL = 0.3
_S_STEAL = 0.5
_P_CLEAR = 0.9  # probability the rolling path is unobstructed


@dataclass(frozen=True)
class OptimizerConfig:
    population: int = 50
    iterations: int = 40
    bounds: tuple[float, float] = (-40.0, 40.0)
    seed: Seed = Seed(0)

    def __post_init__(self) -> None:
        if self.population < 4:
            raise ValueError("population must be >= 4 (one beetle per phase)")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        lo, hi = self.bounds
        if lo >= hi:
            raise ValueError(f"bounds must satisfy lo < hi, got {self.bounds}")


@dataclass(frozen=True)
class SearchResult:
    best_point: np.ndarray
    best_fitness: float
    history: tuple[float, ...]  # global best after init and after each iteration
    evaluations: int
    init_evaluations: int = field(default=0)


def _split(population: int) -> tuple[int, int, int, int]:
    n_roll = int(round(population * 6 / 30))
    n_brood = int(round(population * 6 / 30))
    n_forage = int(round(population * 7 / 30))
    n_thief = population - n_roll - n_brood - n_forage
    return n_roll, n_brood, n_forage, n_thief


def optimize(
    fitness: Callable[[np.ndarray], float],
    dim: int,
    config: OptimizerConfig,
) -> SearchResult:
    """Minimize `fitness` over the box; budget population*(iterations+1) calls."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    lo, hi = config.bounds
    lb = np.full(dim, lo)
    ub = np.full(dim, hi)
    pop = config.population
    iters = config.iterations
    n_roll, n_brood, n_forage, n_thief = _split(pop)

    rng = np.random.default_rng(config.seed.value)
    x = rng.uniform(lb, ub, size=(pop, dim))
    fit = np.array([float(fitness(p)) for p in x])
    evals = pop
    prev = x.copy()

    best_i = int(np.argmin(fit))
    gbest = x[best_i].copy()
    gbest_f = float(fit[best_i])
    history = [gbest_f]

    for t in range(iters):
        # pre-draw every random quantity for this iteration
        clear = rng.random(n_roll) < _P_CLEAR
        alpha = np.where(rng.random(n_roll) > 0.1, 1.0, -1.0)
        theta = rng.integers(0, 181, n_roll)
        b1 = rng.random((n_brood, dim))
        b2 = rng.random((n_brood, dim))
        c1 = rng.normal(size=n_forage)
        c2 = rng.random((n_forage, dim))
        g = rng.normal(size=(n_thief, dim))

        R = 1.0 - (t + 1) / iters
        worst = x[int(np.argmax(fit))].copy()
        lbest = x[int(np.argmin(fit))].copy()
        new = np.empty_like(x)

        rows = slice(0, n_roll)
        roll = x[rows] + alpha[:, None] * _K_DEFLECT * prev[rows] \
            + _B_ROLL * np.abs(x[rows] - worst)
        with np.errstate(over="ignore", invalid="ignore"):
            dance_step = np.tan(np.deg2rad(theta))[:, None] * np.abs(x[rows] - prev[rows])
        stuck = np.isin(theta, (0, 90, 180))
        dance = np.where(stuck[:, None], x[rows], x[rows] + dance_step)
        new[rows] = np.where(clear[:, None], roll, dance)

        spawn_lo = np.clip(lbest * (1.0 - R), lb, ub)
        spawn_hi = np.clip(lbest * (1.0 + R), lb, ub)
        spawn_lo, spawn_hi = np.minimum(spawn_lo, spawn_hi), np.maximum(spawn_lo, spawn_hi)
        rows = slice(n_roll, n_roll + n_brood)
        brood = lbest + b1 * (x[rows] - spawn_lo) + b2 * (x[rows] - spawn_hi)
        new[rows] = np.clip(brood, spawn_lo, spawn_hi)

        forage_lo = np.clip(gbest * (1.0 - R), lb, ub)
        forage_hi = np.clip(gbest * (1.0 + R), lb, ub)
        forage_lo, forage_hi = (
            np.minimum(forage_lo, forage_hi),
            np.maximum(forage_lo, forage_hi),
        )
        rows = slice(n_roll + n_brood, n_roll + n_brood + n_forage)
        new[rows] = x[rows] + c1[:, None] * (x[rows] - forage_lo) + c2 * (x[rows] - forage_hi)

        rows = slice(n_roll + n_brood + n_forage, pop)
        new[rows] = gbest + _S_STEAL * g * (
            np.abs(x[rows] - lbest) + np.abs(x[rows] - gbest)
        )

        np.clip(new, lb, ub, out=new)
        new_fit = np.array([float(fitness(p)) for p in new])
        evals += pop

        prev = x.copy()
        improved = new_fit < fit
        x[improved] = new[improved]
        fit[improved] = new_fit[improved]

        best_i = int(np.argmin(fit))
        if fit[best_i] < gbest_f:
            gbest_f = float(fit[best_i])
            gbest = x[best_i].copy()
        history.append(gbest_f)

    gbest.flags.writeable = False
    return SearchResult(
        best_point=gbest,
        best_fitness=gbest_f,
        history=tuple(history),
        evaluations=evals,
        init_evaluations=pop,
    )
