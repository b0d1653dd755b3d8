"""A small ReLU perceptron that is both the attacked black box and the white-box surrogate."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from ..core import as_image

MAGIC = b"TNN1"


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class TinyClassifier:
    """Dense layers ``x @ W + b`` with ReLU between them and softmax on top.

    Weights are stored as float32; arithmetic is done in float64. Inputs are
    images of ``input_shape`` with intensities divided by 255.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input_shape: tuple[int, int, int] = (32, 32, 3)

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float32) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float32) for b in self.biases]
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix")
        if self.weights[0].shape[0] != int(np.prod(self.input_shape)):
            raise ValueError("first layer does not match the input size")
        for w, b, nxt in zip(self.weights, self.biases, self.weights[1:] + [None]):
            if b.shape != (w.shape[1],):
                raise ValueError("bias length must equal layer output width")
            if nxt is not None and nxt.shape[0] != w.shape[1]:
                raise ValueError("consecutive layer sizes do not chain")

    @classmethod
    def init(cls, sizes: Sequence[int] = (3072, 64, 3), seed: int = 0,
             input_shape=(32, 32, 3)) -> "TinyClassifier":
        rng = np.random.default_rng(seed)
        ws = [rng.normal(0.0, np.sqrt(2.0 / m), size=(m, n)) for m, n in zip(sizes, sizes[1:])]
        bs = [np.zeros(n) for n in sizes[1:]]
        return cls(ws, bs, tuple(input_shape))

    @classmethod
    def zeros(cls, sizes: Sequence[int] = (3072, 64, 3), input_shape=(32, 32, 3)):
        return cls([np.zeros((m, n)) for m, n in zip(sizes, sizes[1:])],
                   [np.zeros(n) for n in sizes[1:]], tuple(input_shape))

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[1]

    def _flatten(self, images) -> np.ndarray:
        x = np.asarray(images, dtype=np.float64)
        single = x.ndim == 3
        if single:
            x = x[None]
        if x.shape[1:] != tuple(self.input_shape):
            raise ValueError(f"expected images of shape {self.input_shape}, got {x.shape[1:]}")
        return x.reshape(len(x), -1) / 255.0, single

    def _layers(self, x: np.ndarray):
        """Forward pass keeping the pre-activations for backprop."""
        acts, pre = [x], []
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w.astype(np.float64) + b.astype(np.float64)
            pre.append(z)
            if k < len(self.weights) - 1:
                acts.append(np.maximum(z, 0.0))
        return acts, pre

    def logits(self, images) -> np.ndarray:
        x, single = self._flatten(images)
        z = self._layers(x)[1][-1]
        return z[0] if single else z

    def __call__(self, images) -> np.ndarray:
        return softmax(self.logits(images))

    def predict(self, images) -> np.ndarray:
        return np.argmax(self.logits(images), axis=-1)

    def save(self, path):
        save_weights(self, path)

    @classmethod
    def load(cls, path, input_shape=(32, 32, 3)) -> "TinyClassifier":
        return load_weights(path, input_shape)


def forward(model: TinyClassifier, image) -> np.ndarray:
    """Softmax scores for one image."""
    return model(as_image(image))


def _loss_and_dlogits(z: np.ndarray, label: int, loss: str, kappa: float):
    if loss == "cross_entropy":
        p = softmax(z)
        value = -np.log(max(p[label], 1e-300))
        g = p.copy()
        g[label] -= 1.0
        return value, g
    if loss == "margin":
        others = np.delete(np.arange(z.size), label)
        j = others[int(np.argmax(z[others]))]
        m = z[label] - z[j]
        g = np.zeros_like(z)
        if m > -kappa:
            g[label], g[j] = 1.0, -1.0
            return float(m), g
        return -kappa, g
    raise ValueError(f"unknown loss {loss!r}")


def loss_and_gradient(model: TinyClassifier, image, label: int,
                      loss: Literal["margin", "cross_entropy"] = "margin",
                      kappa: float = 0.0) -> tuple[float, np.ndarray]:
    """Loss at ``label`` and its gradient with respect to the input.

    ``image`` is in 0-255 units and may be real-valued; the returned
    gradient is with respect to the same 0-255 units. The margin loss is
    ``max(z_label - max_{j != label} z_j, -kappa)`` on logits, which an
    un-targeted attack minimizes.
    """
    x, _ = model._flatten(np.asarray(image, dtype=np.float64))
    acts, pre = model._layers(x)
    value, g = _loss_and_dlogits(pre[-1][0], label, loss, kappa)
    g = g[None]
    for k in range(len(model.weights) - 1, -1, -1):
        g = g @ model.weights[k].astype(np.float64).T
        if k > 0:
            g = g * (pre[k - 1] > 0)
    grad = g.reshape(model.input_shape) / 255.0
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite input gradient")
    return float(value), grad


def input_gradient(model: TinyClassifier, image, label: int, loss="margin",
                   kappa: float = 0.0) -> np.ndarray:
    return loss_and_gradient(model, image, label, loss, kappa)[1]


def save_weights(model: TinyClassifier, path):
    """Write the ``TNN1`` format: magic, layer count, then per layer rows, cols,
    row-major weights and the bias, all little-endian."""
    out = [MAGIC, struct.pack("<I", len(model.weights))]
    for w, b in zip(model.weights, model.biases):
        out.append(struct.pack("<II", *w.shape))
        out.append(w.astype("<f4").tobytes(order="C"))
        out.append(b.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(out))


def load_weights(path, input_shape=(32, 32, 3)) -> TinyClassifier:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a TNN1 weights file")
    (n,), off = struct.unpack_from("<I", data, 4), 8
    ws, bs = [], []
    for _ in range(n):
        rows, cols = struct.unpack_from("<II", data, off)
        off += 8
        w = np.frombuffer(data, "<f4", rows * cols, off).reshape(rows, cols)
        off += 4 * rows * cols
        b = np.frombuffer(data, "<f4", cols, off)
        off += 4 * cols
        ws.append(w.astype(np.float32))
        bs.append(b.astype(np.float32))
    if off != len(data):
        raise ValueError(f"{path}: trailing bytes after last layer")
    return TinyClassifier(ws, bs, tuple(input_shape))


@dataclass
class TrainReport:
    train_accuracy: float
    test_accuracy: float | None
    losses: list[float] = field(default_factory=list)


def train(images, labels, epochs: int = 10, lr: float = 0.003, seed: int = 0,
          hidden: int = 64, batch_size: int = 32, momentum: float = 0.9,
          num_classes: int | None = None, test=None,
          model: TinyClassifier | None = None):
    """Mini-batch SGD with momentum on cross-entropy. Returns ``(model, TrainReport)``.

    Inputs are centered at 0.5 during training; the shift is folded into the
    first-layer bias afterwards, so the returned model takes plain /255 input.
    """
    images = np.asarray(images)
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) == 0:
        raise ValueError("cannot train on an empty dataset")
    C = num_classes or int(labels.max()) + 1
    rng = np.random.default_rng(seed)
    if model is None:
        shape = images.shape[1:]
        model = TinyClassifier.init((int(np.prod(shape)), hidden, C),
                                    seed=int(rng.integers(2**31)), input_shape=shape)
    params = []
    for w, b in zip(model.weights, model.biases):
        params += [w.astype(np.float64), b.astype(np.float64)]
    params[1] = params[1] + 0.5 * params[0].sum(axis=0)
    velocity = [np.zeros_like(p) for p in params]
    n_layers = len(params) // 2
    X = images.reshape(len(images), -1).astype(np.float64) / 255.0 - 0.5
    Y = np.eye(C)[labels]
    losses = []
    for _ in range(epochs):
        order = rng.permutation(len(X))
        total = 0.0
        for start in range(0, len(X), batch_size):
            idx = order[start:start + batch_size]
            acts, pre = [X[idx]], []
            for k in range(n_layers):
                z = acts[-1] @ params[2 * k] + params[2 * k + 1]
                pre.append(z)
                if k < n_layers - 1:
                    acts.append(np.maximum(z, 0.0))
            p = softmax(pre[-1])
            total += -np.sum(Y[idx] * np.log(np.maximum(p, 1e-300)))
            g = (p - Y[idx]) / len(idx)
            grads = [None] * len(params)
            for k in range(n_layers - 1, -1, -1):
                grads[2 * k], grads[2 * k + 1] = acts[k].T @ g, g.sum(axis=0)
                if k > 0:
                    g = (g @ params[2 * k].T) * (pre[k - 1] > 0)
            for p_, v, gr in zip(params, velocity, grads):
                v *= momentum
                v -= lr * gr
                p_ += v
        losses.append(total / len(X))
    params[1] = params[1] - 0.5 * params[0].sum(axis=0)
    model = TinyClassifier(params[0::2], params[1::2], model.input_shape)
    train_acc = float(np.mean(model.predict(images) == labels))
    test_acc = None
    if test is not None:
        test_acc = float(np.mean(model.predict(test[0]) == np.asarray(test[1])))
    return model, TrainReport(train_acc, test_acc, losses)
