"""Images, pixel perturbations, the budgeted black-box model and the attack objective."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

Array = np.ndarray
Scorer = Callable[[Array], Array]


class InvalidImageError(ValueError):
    pass


class InvalidPerturbationError(ValueError):
    pass


class BudgetExhausted(RuntimeError):
    """Raised when a model is queried after its call budget is spent."""


def as_image(data, width: int | None = None, height: int | None = None) -> Array:
    """Validate and return an (H, W, 3) uint8 image.

    Accepts an (H, W, 3) array or a flat row-major sequence together with
    ``width`` and ``height``.
    """
    arr = np.asarray(data)
    if arr.ndim == 1:
        if width is None or height is None:
            raise InvalidImageError("flat image data needs width and height")
        if arr.size != width * height * 3:
            raise InvalidImageError(
                f"expected {width * height * 3} intensities, got {arr.size}")
        arr = arr.reshape(height, width, 3)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidImageError(f"image must have shape (H, W, 3), got {arr.shape}")
    if arr.dtype != np.uint8:
        if np.any(arr < 0) or np.any(arr > 255) or not np.all(np.isfinite(arr)):
            raise InvalidImageError("intensities must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def validate_scores(scores, atol: float = 1e-6) -> Array:
    """Return ``scores`` as a float64 vector after checking it is a distribution."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("score vector must be one-dimensional and nonempty")
    if not np.all(np.isfinite(s)) or np.any(s < 0.0) or np.any(s > 1.0):
        raise ValueError("scores must lie in [0, 1]")
    if abs(s.sum() - 1.0) > atol:
        raise ValueError(f"scores sum to {s.sum():.8g}, not 1")
    return s


@dataclass(frozen=True)
class PixelPerturbation:
    """An ordered list of (x, y, r, g, b) pixel replacements, at most ``limit`` long."""

    tuples: Array
    limit: int

    def __post_init__(self):
        t = np.asarray(self.tuples, dtype=np.int64).reshape(-1, 5)
        object.__setattr__(self, "tuples", t)
        if self.limit < 1:
            raise InvalidPerturbationError("pixel limit must be >= 1")
        if len(t) > self.limit:
            raise InvalidPerturbationError(
                f"{len(t)} tuples exceed the pixel limit {self.limit}")
        if np.any(t[:, 2:] < 0) or np.any(t[:, 2:] > 255):
            raise InvalidPerturbationError("color components must lie in [0, 255]")

    def __len__(self) -> int:
        return len(self.tuples)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PixelPerturbation):
            return NotImplemented
        return self.limit == other.limit and np.array_equal(self.tuples, other.tuples)

    def positions(self) -> list[tuple[int, int]]:
        return [(int(x), int(y)) for x, y in self.tuples[:, :2]]


def apply_perturbation(image: Array, p: PixelPerturbation) -> Array:
    """Copy of ``image`` with each tuple's pixel replaced by its color.

    Tuples are applied in order, so a later tuple at the same coordinate wins.
    """
    image = as_image(image)
    h, w, _ = image.shape
    t = p.tuples
    if len(t) and (np.any(t[:, 0] < 0) or np.any(t[:, 0] >= w)
                   or np.any(t[:, 1] < 0) or np.any(t[:, 1] >= h)):
        raise InvalidPerturbationError("perturbation coordinate outside the image")
    out = image.copy()
    for x, y, r, g, b in t:
        out[y, x] = (r, g, b)
    return out


@dataclass(frozen=True)
class AttackConfig:
    true_label: int
    pixels: int = 25
    budget: int = 15000
    targeted: bool = False
    target_label: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.pixels < 1:
            raise ValueError("pixel limit must be >= 1")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.targeted != (self.target_label is not None):
            raise ValueError("target label must be given iff the attack is targeted")

    @property
    def goal_label(self) -> int:
        return self.target_label if self.targeted else self.true_label


def _check_label(label: int, n: int):
    if not 0 <= label < n:
        raise IndexError(f"label {label} out of range for {n} classes")


def adversarial_loss(scores, cfg: AttackConfig) -> float:
    """One minus the probability of the goal class; larger is more adversarial.

    The goal class is the true label for un-targeted attacks and the target
    label otherwise.
    """
    s = np.asarray(scores, dtype=np.float64)
    _check_label(cfg.goal_label, s.size)
    return 1.0 - float(s[cfg.goal_label])


def is_success(scores, cfg: AttackConfig) -> bool:
    s = np.asarray(scores, dtype=np.float64)
    _check_label(cfg.true_label, s.size)
    if cfg.targeted:
        _check_label(cfg.target_label, s.size)
    top = int(np.argmax(s))  # first maximum, so ties go to the lowest index
    if cfg.targeted:
        return top == cfg.target_label
    return top != cfg.true_label


class BudgetedModel:
    """Wraps a scorer with an exact call counter and a hard budget.

    Only successful score requests are debited: if the inner scorer raises
    (e.g. a transport failure) the counter is left unchanged. The counter is
    guarded by a lock, so one instance may be shared between threads, but the
    inner scorer must then tolerate concurrent calls.
    """

    def __init__(self, inner: Scorer, budget: int = 15000):
        if budget < 1:
            raise ValueError("budget must be >= 1")
        self.inner = inner
        self.budget = int(budget)
        self.calls_used = 0
        self._lock = threading.Lock()

    @property
    def remaining(self) -> int:
        return self.budget - self.calls_used

    def debit(self, n: int):
        """Charge ``n`` call-equivalents without querying the model."""
        if n < 0:
            raise ValueError("cannot debit a negative number of calls")
        with self._lock:
            if self.calls_used + n > self.budget:
                self.calls_used = self.budget
                raise BudgetExhausted("debit exceeds remaining budget")
            self.calls_used += n

    def score(self, image: Array) -> Array:
        with self._lock:
            if self.calls_used >= self.budget:
                raise BudgetExhausted(f"budget of {self.budget} calls exhausted")
            self.calls_used += 1
        try:
            return np.asarray(self.inner(image), dtype=np.float64)
        except BaseException:
            with self._lock:
                self.calls_used -= 1
            raise


def score_budgeted(model: BudgetedModel, image: Array) -> Array:
    return model.score(image)


def search_bounds(width: int, height: int, pixels: int) -> tuple[Array, Array]:
    """Half-open search box [lower, upper) for ``pixels`` tuples of (x, y, r, g, b)."""
    lower = np.zeros(5 * pixels)
    upper = np.tile([float(width), float(height), 256.0, 256.0, 256.0], pixels)
    return lower, upper


def encode(p: PixelPerturbation) -> Array:
    return p.tuples.astype(np.float64).ravel()


def decode(v, bounds: tuple[Array, Array], limit: int | None = None) -> PixelPerturbation:
    """Floor a continuous search vector to integers and clamp into ``bounds``."""
    v = np.asarray(v, dtype=np.float64)
    lower, upper = (np.asarray(b, dtype=np.float64) for b in bounds)
    if v.ndim != 1 or v.size % 5 or v.size != lower.size:
        raise ValueError(f"vector length {v.size} does not match bounds of length {lower.size}")
    ints = np.clip(np.floor(v), lower, upper - 1).astype(np.int64)
    return PixelPerturbation(ints.reshape(-1, 5), limit or v.size // 5)


@dataclass
class SearchResult:
    """What an optimizer hands back: best point, its value, and the call count."""

    x: Array
    fun: float
    success: bool
    calls: int
    trace: list[tuple[int, float]] = field(default_factory=list)


@dataclass
class AttackOutcome:
    success: bool
    calls: int
    adversarial: Array
    predicted_label: int
    trace: list[tuple[int, float]] = field(default_factory=list)
    perturbation: Optional[PixelPerturbation] = None


class AttackObjective:
    """Callable mapping a search vector to ``(negated adversarial loss, success)``.

    Every evaluation is one debit on ``model``; ``BudgetExhausted`` propagates
    to the optimizer. The objective remembers the best evaluation it has seen
    (and the first successful one), so an outcome can be built without
    querying the model again.
    """

    def __init__(self, image: Array, model: BudgetedModel, cfg: AttackConfig):
        self.image = as_image(image)
        self.model = model
        self.cfg = cfg
        h, w, _ = self.image.shape
        self.bounds = search_bounds(w, h, cfg.pixels)
        self.best: tuple[float, Array, Array] | None = None
        self.hit: tuple[Array, Array] | None = None

    def perturbed(self, v) -> Array:
        return apply_perturbation(self.image, decode(v, self.bounds, self.cfg.pixels))

    def __call__(self, v) -> tuple[float, bool]:
        v = np.array(v, dtype=np.float64)
        scores = self.model.score(self.perturbed(v))
        value = -adversarial_loss(scores, self.cfg)
        success = is_success(scores, self.cfg)
        if self.best is None or value < self.best[0]:
            self.best = (value, v, scores)
        if success and self.hit is None:
            self.hit = (v, scores)
        return value, success

    def outcome(self, trace: list[tuple[int, float]] | None = None) -> AttackOutcome:
        if self.hit is not None:
            v, scores = self.hit
        elif self.best is not None:
            _, v, scores = self.best
        else:
            return AttackOutcome(False, self.model.calls_used, self.image.copy(),
                                 -1, list(trace or []), None)
        p = decode(v, self.bounds, self.cfg.pixels)
        return AttackOutcome(
            success=self.hit is not None,
            calls=self.model.calls_used,
            adversarial=apply_perturbation(self.image, p),
            predicted_label=int(np.argmax(scores)),
            trace=list(trace or []),
            perturbation=p,
        )
