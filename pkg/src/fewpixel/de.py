"""DE/rand/1/bin, the optimizer behind the classic one-pixel attack."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._search import Evaluator, as_bounds
from .core import BudgetExhausted, SearchResult


@dataclass(frozen=True)
class DeParams:
    popsize: int = 100
    F: float = 0.5
    CR: float = 0.7
    max_generations: Optional[int] = None  # None: run until the budget is spent

    def __post_init__(self):
        if self.popsize < 4:
            raise ValueError("rand/1 mutation needs a population of at least 4")
        if not 0.0 < self.F <= 2.0:
            raise ValueError("F must lie in (0, 2]")
        if not 0.0 <= self.CR <= 1.0:
            raise ValueError("CR must lie in [0, 1]")


def init_population(bounds, popsize: int, rng, seed_vector=None,
                    sampler: Optional[Callable] = None) -> np.ndarray:
    """Uniform population in the box.

    ``seed_vector`` replaces member 0. ``sampler(rng)`` if given draws every
    other member instead of the uniform law (used for mask-guided starts).
    """
    if popsize < 4:
        raise ValueError("population size must be >= 4")
    lower, upper = as_bounds(bounds)
    if sampler is None:
        pop = rng.uniform(lower, upper, size=(popsize, lower.size))
    else:
        pop = np.array([sampler(rng) for _ in range(popsize)], dtype=np.float64)
    if seed_vector is not None:
        pop[0] = np.asarray(seed_vector, dtype=np.float64)
    return pop


def mutate(population: np.ndarray, i: int, F: float, rng, bounds=None) -> np.ndarray:
    """rand/1 mutant ``v_a + F (v_b - v_c)`` with a, b, c distinct and != i, clamped into bounds."""
    n = len(population)
    if n < 4:
        raise ValueError("rand/1 mutation needs a population of at least 4")
    others = np.delete(np.arange(n), i)
    a, b, c = rng.choice(others, 3, replace=False)
    mutant = population[a] + F * (population[b] - population[c])
    if bounds is not None:
        lower, upper = as_bounds(bounds)
        mutant = np.clip(mutant, lower, upper)
    return mutant


def crossover(target, mutant, CR: float, rng) -> np.ndarray:
    """Binomial crossover with one coordinate always taken from the mutant."""
    target = np.asarray(target, dtype=np.float64)
    mutant = np.asarray(mutant, dtype=np.float64)
    if target.shape != mutant.shape:
        raise ValueError("target and mutant lengths differ")
    take = rng.random(target.size) < CR
    take[rng.integers(target.size)] = True
    return np.where(take, mutant, target)


def evolve(objective, bounds, params: DeParams = DeParams(), rng=None,
           seed_vector=None, sampler=None, max_calls: int | None = None) -> SearchResult:
    """Minimize ``objective`` by generational differential evolution.

    Trials of one generation are built from the population as it stood at the
    start of that generation; a trial replaces its target when it is not
    worse. The run stops at the first successful evaluation, including during
    the initial population, and a budget may cut a generation short.
    """
    rng = np.random.default_rng(rng)
    lower, upper = as_bounds(bounds)
    pop = init_population((lower, upper), params.popsize, rng, seed_vector, sampler)
    fit = np.full(len(pop), np.inf)
    ev = Evaluator(objective, max_calls)
    new_pop, new_fit = pop, fit

    def result(success: bool, x=None, fx=None) -> SearchResult:
        if x is None:
            k = int(np.argmin(fit))
            x, fx = pop[k], fit[k]
        return SearchResult(np.array(x), float(fx), success, ev.calls, ev.trace)

    try:
        for i in range(len(pop)):
            fit[i], ok = ev(pop[i])
            if ok:
                return result(True, pop[i], fit[i])
        gen = 0
        while params.max_generations is None or gen < params.max_generations:
            snapshot = pop.copy()
            new_pop, new_fit = pop.copy(), fit.copy()
            for i in range(len(pop)):
                trial = crossover(snapshot[i], mutate(snapshot, i, params.F, rng, (lower, upper)),
                                  params.CR, rng)
                ft, ok = ev(trial)
                if ft <= fit[i]:
                    new_pop[i], new_fit[i] = trial, ft
                if ok:
                    return result(True, trial, ft)
            pop, fit = new_pop, new_fit
            gen += 1
    except BudgetExhausted:
        pop, fit = new_pop, new_fit
    return result(False)
