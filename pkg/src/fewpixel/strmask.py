"""Structured-sparsity mask: an ADMM group-lasso attack on a white-box surrogate,
thresholded into a per-channel binary mask that seeds the black-box search."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .core import PixelPerturbation, as_image, encode
from .models.tiny import TinyClassifier, loss_and_gradient


@dataclass(frozen=True)
class StrAttackParams:
    """ADMM settings. Perturbations are measured in [0, 1] intensity units."""

    gamma: float = 1.0
    tau: float = 0.5
    rho: float = 1.0
    group_size: int = 2
    stride: int = 2
    iterations: int = 20
    inner_steps: int = 5
    step_size: float = 0.01
    kappa: float = 0.0
    threshold: float = 0.1
    call_cost: int = 5
    tau_backoff: int = 3  # halvings of tau tried when the mask comes out empty

    def __post_init__(self):
        if min(self.gamma, self.tau, self.rho) <= 0:
            raise ValueError("gamma, tau and rho must be positive")
        if self.group_size < 1 or self.stride < 1:
            raise ValueError("group size and stride must be >= 1")
        if self.stride < self.group_size:
            raise ValueError("overlapping groups (stride < group size) are not supported")
        if self.iterations < 1 or self.inner_steps < 1:
            raise ValueError("iteration counts must be >= 1")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("relative threshold must lie in (0, 1)")
        if self.call_cost < 0:
            raise ValueError("call cost must be non-negative")
        if self.tau_backoff < 0:
            raise ValueError("tau backoff must be non-negative")


def _group_slices(shape, k: int, s: int):
    h, w = shape[:2]
    for y in range(0, h, s):
        for x in range(0, w, s):
            yield np.s_[y:y + k, x:x + k]


def group_norm(v: np.ndarray, k: int = 2, s: int = 2) -> float:
    """Sum of the Euclidean norms of the k x k (all-channel) groups."""
    return float(sum(np.linalg.norm(v[g]) for g in _group_slices(v.shape, k, s)))


def group_prox(v, lam: float, k: int = 2, s: int = 2) -> np.ndarray:
    """Block soft-thresholding: each group G becomes max(0, 1 - lam/|G|) G.

    ``v`` is an (H, W[, C]) array and groups are k x k spatial windows on a
    stride-``s`` grid spanning every channel; entries not covered by a group
    (possible when ``s > k``) pass through unchanged. A 1-D ``v`` is treated
    as a single group.
    """
    if lam < 0:
        raise ValueError("threshold must be non-negative")
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        n = np.linalg.norm(v)
        return v * max(0.0, 1.0 - lam / n) if n > 0 else v.copy()
    out = v.copy()
    for g in _group_slices(v.shape, k, s):
        n = np.linalg.norm(v[g])
        out[g] = v[g] * max(0.0, 1.0 - lam / n) if n > 0 else 0.0
    return out


def structured_objective(model, x0, z, label, params: StrAttackParams) -> float:
    """Attack loss + gamma * squared L2 + tau * group norm, ``z`` in [0, 1] units."""
    f, _ = loss_and_gradient(model, (x0 + z) * 255.0, label, "margin", params.kappa)
    return (f + params.gamma * float(np.sum(z * z))
            + params.tau * group_norm(z, params.group_size, params.stride))


@dataclass
class AdmmResult:
    delta: np.ndarray  # pixel units
    objective: list[float] = field(default_factory=list)


def admm_structured(model: TinyClassifier, image, true_label: int,
                    params: StrAttackParams = StrAttackParams()) -> AdmmResult:
    """Solve the structured attack problem by ADMM with the split delta = z.

    The delta step takes ``inner_steps`` gradient steps on the attack loss
    plus the quadratic terms; the z step is the group prox followed by
    projection onto the valid pixel range; the scaled dual is then updated.
    The objective is recorded at z after each outer iteration.
    """
    x0 = as_image(image).astype(np.float64) / 255.0
    delta = np.zeros_like(x0)
    z = np.zeros_like(x0)
    u = np.zeros_like(x0)
    lam = params.tau / params.rho
    history = []
    for _ in range(params.iterations):
        for _ in range(params.inner_steps):
            _, g = loss_and_gradient(model, (x0 + delta) * 255.0, true_label,
                                     "margin", params.kappa)
            grad = (g * 255.0 + 2.0 * params.gamma * delta
                    + params.rho * (delta - z + u))
            if not np.all(np.isfinite(grad)):
                raise FloatingPointError("non-finite gradient in the delta step")
            delta = delta - params.step_size * grad
        z = group_prox(delta + u, lam, params.group_size, params.stride)
        z = np.clip(x0 + z, 0.0, 1.0) - x0
        u = u + delta - z
        history.append(structured_objective(model, x0, z, true_label, params))
    return AdmmResult(z * 255.0, history)


def strattack(model: TinyClassifier, image, true_label: int,
              params: StrAttackParams = StrAttackParams()) -> np.ndarray:
    """Structured perturbation (pixel units) found on the white-box surrogate."""
    return admm_structured(model, image, true_label, params).delta


def binary_mask(delta, threshold: float = 0.1) -> np.ndarray:
    """Per-channel mask of entries with ``|delta| > threshold * max|delta|``."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("relative threshold must lie in (0, 1)")
    a = np.abs(np.asarray(delta, dtype=np.float64))
    top = a.max(initial=0.0)
    if top == 0.0:
        return np.zeros(a.shape, dtype=bool)
    return a > threshold * top


def structured_mask(model: TinyClassifier, image, true_label: int,
                    params: StrAttackParams = StrAttackParams()) -> np.ndarray:
    """Binary mask from the structured attack.

    Confident inputs can sit at the all-zero optimum when every group
    gradient is below tau, so tau is halved up to ``tau_backoff`` times
    until some pixel survives. The result may still be empty.
    """
    for _ in range(params.tau_backoff + 1):
        mask = binary_mask(strattack(model, image, true_label, params), params.threshold)
        if mask.any():
            break
        params = replace(params, tau=params.tau / 2)
    return mask


def eligible_pixels(mask: np.ndarray) -> np.ndarray:
    """(x, y) coordinates of pixels with at least one channel set, row-major order."""
    ys, xs = np.nonzero(np.asarray(mask).any(axis=2))
    return np.stack([xs, ys], axis=1)


def init_from_mask(image, mask, n: int, rng) -> tuple[PixelPerturbation, bool]:
    """Pick up to ``n`` distinct mask-eligible pixels and paint each with its inverse color.

    Returns the perturbation and a flag that is true when the mask had no
    eligible pixel and positions were drawn uniformly instead.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    image = as_image(image)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != image.shape:
        raise ValueError("mask and image shapes differ")
    cand = eligible_pixels(mask)
    fallback = len(cand) == 0
    if fallback:
        warnings.warn("empty mask; falling back to uniform random pixels", RuntimeWarning)
        h, w, _ = image.shape
        ys, xs = np.divmod(np.arange(h * w), w)
        cand = np.stack([xs, ys], axis=1)
    pick = cand[rng.choice(len(cand), size=min(n, len(cand)), replace=False)]
    colors = 255 - image[pick[:, 1], pick[:, 0]].astype(np.int64)
    return PixelPerturbation(np.column_stack([pick, colors]), n), fallback


def pad_perturbation(p: PixelPerturbation, d: int) -> PixelPerturbation:
    """Repeat tuples cyclically up to ``d``; duplicates rewrite the same pixel, so the image effect is unchanged."""
    t = p.tuples
    if len(t) == 0:
        raise ValueError("cannot pad an empty perturbation")
    return PixelPerturbation(t[np.arange(d) % len(t)], d)


def mask_init_vector(image, mask, d: int, rng) -> np.ndarray:
    p, _ = init_from_mask(image, mask, d, rng)
    return encode(pad_perturbation(p, d))


def mask_call_cost(params: StrAttackParams = StrAttackParams()) -> int:
    """Black-box calls charged for producing one mask."""
    return params.call_cost


def save_mask_png(mask, prefix) -> list[Path]:
    """Write one 0/255 grayscale PNG per channel: ``<prefix>_r.png`` etc."""
    mask = np.asarray(mask, dtype=bool)
    paths = []
    for c, name in enumerate("rgb"):
        path = Path(f"{prefix}_{name}.png")
        PILImage.fromarray(mask[..., c].astype(np.uint8) * 255, "L").save(path)
        paths.append(path)
    return paths


def load_mask_png(prefix) -> np.ndarray:
    chans = []
    for name in "rgb":
        with PILImage.open(f"{prefix}_{name}.png") as im:
            chans.append(np.asarray(im.convert("L")) > 127)
    return np.stack(chans, axis=2)
