"""Generalized simulated annealing with Tsallis visiting and acceptance laws."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from ._search import Evaluator, as_bounds
from .core import BudgetExhausted, SearchResult

TAIL_LIMIT = 1.0e8


@dataclass(frozen=True)
class GsaParams:
    """Annealing hyperparameters.

    ``q_v = 3`` is accepted for evaluating the schedule, but the visiting law
    (and hence :func:`anneal`) needs ``q_v < 3``.

    ``accept_temperature`` selects the temperature used in the acceptance
    test: ``"divided"`` uses T(t) / t, ``"visiting"`` uses T(t) itself.
    ``mode`` picks the generalized (Tsallis) or the simple Metropolis rule.
    """

    q_v: float = 2.62
    q_a: float = -5.0
    T1: float = 5230.0
    restart_ratio: float = 2e-6
    accept_temperature: Literal["divided", "visiting"] = "divided"
    mode: Literal["generalized", "simple"] = "generalized"

    def __post_init__(self):
        if not 1.0 < self.q_v <= 3.0:
            raise ValueError("q_v must lie in (1, 3]")
        if self.T1 <= 0:
            raise ValueError("T1 must be positive")
        if not 0.0 < self.restart_ratio < 1.0:
            raise ValueError("restart ratio must lie in (0, 1)")
        if self.q_a == 1.0:
            raise ValueError("q_a = 1 is singular; use mode='simple' instead")
        if self.accept_temperature not in ("divided", "visiting"):
            raise ValueError(f"unknown acceptance temperature rule {self.accept_temperature!r}")
        if self.mode not in ("generalized", "simple"):
            raise ValueError(f"unknown acceptance mode {self.mode!r}")


@dataclass
class AnnealState:
    x: np.ndarray
    fx: float
    best_x: np.ndarray
    best_f: float
    t: int = 1
    temperature: float = 0.0


def temperature(t: float, params: GsaParams = GsaParams()) -> float:
    """Visiting temperature at iteration ``t`` (``t >= 1``)."""
    if t < 1:
        raise ValueError("iteration must be >= 1")
    q = params.q_v - 1.0
    return params.T1 * (2.0 ** q - 1.0) / ((1.0 + t) ** q - 1.0)


def acceptance_probability(delta_e: float, t_accept: float,
                           params: GsaParams = GsaParams(),
                           mode: str | None = None) -> float:
    """Probability of moving to a candidate that is ``delta_e`` worse."""
    if not math.isfinite(delta_e):
        raise ValueError("energy difference must be finite")
    if t_accept <= 0:
        raise ValueError("acceptance temperature must be positive")
    mode = mode or params.mode
    if delta_e <= 0:
        return 1.0
    if mode == "simple":
        return math.exp(-delta_e / t_accept)
    if mode != "generalized":
        raise ValueError(f"unknown acceptance mode {mode!r}")
    base = 1.0 - (1.0 - params.q_a) * delta_e / t_accept
    if base <= 0.0:
        return 0.0
    return min(1.0, base ** (1.0 / (1.0 - params.q_a)))


class VisitingDistribution:
    """Tsallis-Stariolo visiting law: a ratio of Gaussians scaled by temperature."""

    def __init__(self, q_v: float):
        if not 1.0 < q_v < 3.0:
            raise ValueError("the visiting law needs 1 < q_v < 3")
        self.q_v = q_v
        q = q_v
        f2 = math.exp((4.0 - q) * math.log(q - 1.0))
        f3 = math.exp((2.0 - q) * math.log(2.0) / (q - 1.0))
        self._f4_base = math.sqrt(math.pi) * f2 / (f3 * (3.0 - q))
        # pi (1 - a) / sin(pi (1 - a)) / Gamma(2 - a) reduces to Gamma(a) by reflection,
        # which stays positive for every q in (1, 3)
        self._log_f6 = math.lgamma(1.0 / (q - 1.0) - 0.5)

    def scale(self, T: float) -> float:
        q = self.q_v
        log_f4 = math.log(self._f4_base) + math.log(T) / (q - 1.0)
        # steps are clipped at TAIL_LIMIT anyway, so cap the exponent instead of overflowing
        return math.exp(min(-(q - 1.0) * (self._log_f6 - log_f4) / (3.0 - q), 700.0))

    def step(self, T: float, g1: np.ndarray, g2: np.ndarray) -> np.ndarray:
        q = self.q_v
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            den = np.abs(g2) ** ((q - 1.0) / (3.0 - q))
            s = self.scale(T) * g1 / den
        s = np.where(g1 == 0.0, 0.0, s)
        return np.clip(np.nan_to_num(s, nan=0.0), -TAIL_LIMIT, TAIL_LIMIT)


def wrap(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Fold ``x`` periodically into the half-open box [lower, upper)."""
    span = upper - lower
    y = lower + np.mod(x - lower, span)
    return np.where((y >= upper) | (y < lower), lower, y)


def visiting_step(current, T: float, params: GsaParams, rng, bounds) -> np.ndarray:
    """Candidate obtained by a heavy-tailed jump of every coordinate, wrapped into bounds."""
    lower, upper = as_bounds(bounds)
    current = np.asarray(current, dtype=np.float64)
    g = rng.standard_normal((2, current.size))
    dist = VisitingDistribution(params.q_v)
    return wrap(current + dist.step(T, g[0], g[1]), lower, upper)


def anneal(objective, bounds, init=None, params: GsaParams = GsaParams(),
           rng=None, max_calls: int | None = None) -> SearchResult:
    """Minimize ``objective`` over a box by generalized simulated annealing.

    ``objective`` returns a value or a ``(value, success)`` pair; the run stops
    at the first successful evaluation. A :class:`BudgetExhausted` raised by
    the objective (or reaching ``max_calls``) ends the run unsuccessfully.
    Every iteration costs exactly one evaluation.
    """
    rng = np.random.default_rng(rng)
    lower, upper = as_bounds(bounds)
    if init is None:
        init = rng.uniform(lower, upper)
    init = np.asarray(init, dtype=np.float64)
    if init.shape != lower.shape or np.any(init < lower) or np.any(init >= upper):
        raise ValueError("initial point must lie inside the bounds")
    dist = VisitingDistribution(params.q_v)
    ev = Evaluator(objective, max_calls)

    def result(state: AnnealState | None, success: bool, x=None, fx=None) -> SearchResult:
        if x is None:
            x, fx = (state.best_x, state.best_f) if state else (init, math.inf)
        return SearchResult(np.array(x), float(fx), success, ev.calls, ev.trace)

    try:
        fx, ok = ev(init)
    except BudgetExhausted:
        return result(None, False)
    if ok:
        return result(None, True, init, fx)
    state = AnnealState(init.copy(), fx, init.copy(), fx)
    try:
        while True:
            T = temperature(state.t, params)
            state.temperature = T
            g = rng.standard_normal((2, init.size))
            cand = wrap(state.x + dist.step(T, g[0], g[1]), lower, upper)
            fc, ok = ev(cand)
            if fc < state.best_f:
                state.best_x, state.best_f = cand, fc
            if ok:
                return result(state, True, cand, fc)
            t_acc = T / state.t if params.accept_temperature == "divided" else T
            p = acceptance_probability(fc - state.fx, t_acc, params)
            if p >= 1.0 or (p > 0.0 and rng.random() <= p):
                state.x, state.fx = cand, fc
            state.t += 1
            if temperature(state.t, params) / params.T1 < params.restart_ratio:
                state.t = 1
                state.x, state.fx = state.best_x.copy(), state.best_f
    except BudgetExhausted:
        return result(state, False)
