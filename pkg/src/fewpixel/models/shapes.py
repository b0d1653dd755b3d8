"""Synthetic 32x32 shapes dataset: disks, squares and crosses on flat noisy backgrounds."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

SIZE = 32
CLASS_NAMES = ("disk", "square", "cross")
DEFAULT_JITTER = 2


def _foreground(rng, bg: np.ndarray) -> np.ndarray:
    while True:
        fg = rng.integers(0, 256, 3)
        if np.any(np.abs(fg - bg) >= 60):
            return fg


def _place(rng, lo: int, hi: int, jitter: int | None):
    """Two coordinates uniform in [lo, hi), narrowed to within ``jitter`` of the center."""
    if jitter is not None:
        c = SIZE // 2
        lo, hi = max(lo, c - jitter), min(hi, c + jitter + 1)
    return rng.integers(lo, hi, 2)


def _shape_mask(label: int, rng, jitter: int | None = None) -> np.ndarray:
    yy, xx = np.mgrid[:SIZE, :SIZE]
    if label == 0:
        r = int(rng.integers(4, 11))
        cx, cy = _place(rng, r, SIZE - r, jitter)
        return (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
    if label == 1:
        side = int(rng.integers(6, 17))
        # top-left corner; the center sits side // 2 further in
        x0, y0 = _place(rng, side // 2, SIZE - side + 1 + side // 2, jitter) - side // 2
        return (xx >= x0) & (xx < x0 + side) & (yy >= y0) & (yy < y0 + side)
    arm = int(rng.integers(5, 13))
    cx, cy = _place(rng, arm, SIZE - arm, jitter)
    horiz = (np.abs(yy - cy) <= 1) & (np.abs(xx - cx) <= arm)
    vert = (np.abs(xx - cx) <= 1) & (np.abs(yy - cy) <= arm)
    return horiz | vert


def generate_shapes_dataset(count: int, seed: int = 0, jitter: int | None = DEFAULT_JITTER):
    """Return ``(images, labels)``: uint8 array (count, 32, 32, 3) and labels ``i % 3``.

    ``jitter`` bounds how far (in pixels, per axis) a shape's center may sit
    from the image center; ``None`` allows any position that keeps the shape
    inside the frame.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    images = np.empty((count, SIZE, SIZE, 3), dtype=np.uint8)
    labels = np.arange(count) % 3
    for i, label in enumerate(labels):
        bg = rng.integers(0, 256, 3)
        fg = _foreground(rng, bg)
        img = np.where(_shape_mask(int(label), rng, jitter)[..., None], fg, bg)
        img = img + rng.integers(-10, 11, img.shape)
        images[i] = np.clip(img, 0, 255)
    return images, labels


def export_dataset(images, labels, directory):
    """Write ``NNNNN.png`` files and a ``labels.csv`` manifest (filename,label)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["filename", "label"])
        for i, (img, label) in enumerate(zip(images, labels)):
            name = f"{i:05d}.png"
            PILImage.fromarray(np.asarray(img, dtype=np.uint8), "RGB").save(d / name)
            w.writerow([name, int(label)])


def import_dataset(directory):
    d = Path(directory)
    images, labels = [], []
    with open(d / "labels.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            with PILImage.open(d / row["filename"]) as im:
                images.append(np.asarray(im.convert("RGB"), dtype=np.uint8))
            labels.append(int(row["label"]))
    if not images:
        raise ValueError(f"{d}: manifest lists no images")
    return np.stack(images), np.asarray(labels, dtype=np.int64)


def train_test_split(n_train: int = 20000, n_test: int = 500, seed: int = 0,
                     jitter: int | None = DEFAULT_JITTER):
    """The standard split: one generated pool, first ``n_train`` for training."""
    images, labels = generate_shapes_dataset(n_train + n_test, seed, jitter)
    return (images[:n_train], labels[:n_train]), (images[n_train:], labels[n_train:])
