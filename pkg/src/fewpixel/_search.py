"""Helpers shared by the optimizers."""
from __future__ import annotations

import numpy as np

from .core import BudgetExhausted


class Evaluator:
    """Counts evaluations of an objective and enforces an optional cap.

    The objective may return a bare value or a ``(value, success)`` pair. A
    cap reached here raises :class:`BudgetExhausted` just like a budgeted
    model would, so optimizers handle both the same way.
    """

    def __init__(self, objective, max_calls: int | None = None):
        self.objective = objective
        self.max_calls = max_calls
        self.calls = 0
        self.best = np.inf
        self.trace: list[tuple[int, float]] = []

    def __call__(self, x) -> tuple[float, bool]:
        if self.max_calls is not None and self.calls >= self.max_calls:
            raise BudgetExhausted(f"evaluation cap of {self.max_calls} reached")
        out = self.objective(x)
        self.calls += 1
        if isinstance(out, tuple):
            value, success = float(out[0]), bool(out[1])
        else:
            value, success = float(out), False
        if value < self.best:
            self.best = value
            self.trace.append((self.calls, value))
        return value, success


def as_bounds(bounds) -> tuple[np.ndarray, np.ndarray]:
    """Accept ``(lower, upper)`` arrays or a list of ``(lo, hi)`` pairs."""
    b = bounds
    if isinstance(b, tuple) and len(b) == 2 and np.ndim(b[0]) == 1:
        lower, upper = np.asarray(b[0], float), np.asarray(b[1], float)
    else:
        arr = np.asarray(b, dtype=float)
        lower, upper = arr[:, 0], arr[:, 1]
    if lower.shape != upper.shape or np.any(upper <= lower):
        raise ValueError("each bound needs lower < upper")
    return lower, upper
