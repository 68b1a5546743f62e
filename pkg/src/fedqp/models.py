"""Small differentiable classifiers trained with mini-batch SGD + momentum.

Two architectures over flat layered parameters:

* ``logreg``  — layers ``W`` (input_dim x num_classes, row-major), ``b``.
* ``mlp``     — one ReLU hidden layer: ``W1``, ``b1``, ``W2``, ``b2``.

Weights are reshaped as (fan_in, fan_out) so logits = X @ W + b. The loss is
mean softmax cross-entropy; gradients are written out by hand and checked
against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import LayeredParams
from .rng import RandomSource

LOGREG = "logreg"
MLP = "mlp"
ARCHITECTURES = (LOGREG, MLP)


@dataclass(frozen=True)
class ModelSpec:
    architecture: str
    input_dim: int
    num_classes: int
    hidden_dim: int = 0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}")
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.architecture == MLP and self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1 for mlp")

    def layer_layout(self) -> list[tuple[str, int]]:
        d, c, h = self.input_dim, self.num_classes, self.hidden_dim
        if self.architecture == LOGREG:
            return [("W", d * c), ("b", c)]
        return [("W1", d * h), ("b1", h), ("W2", h * c), ("b2", c)]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.5
    batch_size: int = 50
    local_epochs: int = 5

    def __post_init__(self):
        # learning_rate 0 is allowed as the degenerate no-op training case
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.local_epochs < 1:
            raise ValueError("local_epochs must be >= 1")


class Batch:
    """A set of samples: features (n x d) and integer class labels (n,)."""

    __slots__ = ("features", "labels")

    def __init__(self, features, labels):
        self.features = np.asarray(features, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        if self.labels.ndim != 1 or self.labels.shape[0] != self.features.shape[0]:
            raise ValueError(
                f"label count {self.labels.shape} does not match "
                f"feature rows {self.features.shape[0]}"
            )

    def __len__(self) -> int:
        return self.features.shape[0]

    def subset(self, indices) -> "Batch":
        idx = np.asarray(indices, dtype=np.int64)
        return Batch(self.features[idx], self.labels[idx])


def init_params(spec: ModelSpec, rng: RandomSource) -> LayeredParams:
    """Weights ~ N(0, 1/fan_in), biases zero, layers in layout order."""
    d, c, h = spec.input_dim, spec.num_classes, spec.hidden_dim
    if spec.architecture == LOGREG:
        fan_in = {"W": d}
    else:
        fan_in = {"W1": d, "W2": h}
    layers = []
    for name, size in spec.layer_layout():
        if name in fan_in:
            scale = 1.0 / np.sqrt(fan_in[name])
            layers.append((name, scale * rng.normal(size)))
        else:
            layers.append((name, np.zeros(size)))
    return LayeredParams(layers)


def _unpack(arrays: list[np.ndarray], names: tuple[str, ...], input_dim: int):
    """Reshape flat layers into weight matrices given the batch feature dim."""
    if names == ("W", "b"):
        b = arrays[1]
        c = b.size
        if arrays[0].size != input_dim * c:
            raise ValueError(
                f"layer 'W' has {arrays[0].size} entries, expected {input_dim * c}"
            )
        return LOGREG, (arrays[0].reshape(input_dim, c), b)
    if names == ("W1", "b1", "W2", "b2"):
        b1, b2 = arrays[1], arrays[3]
        h, c = b1.size, b2.size
        if arrays[0].size != input_dim * h:
            raise ValueError(
                f"layer 'W1' has {arrays[0].size} entries, expected {input_dim * h}"
            )
        if arrays[2].size != h * c:
            raise ValueError(
                f"layer 'W2' has {arrays[2].size} entries, expected {h * c}"
            )
        return MLP, (arrays[0].reshape(input_dim, h), b1, arrays[2].reshape(h, c), b2)
    raise ValueError(f"unrecognized layer layout {names}")


def _check_labels(labels: np.ndarray, num_classes: int) -> None:
    if labels.size == 0:
        raise ValueError("batch is empty")
    lo, hi = int(labels.min()), int(labels.max())
    if lo < 0 or hi >= num_classes:
        raise ValueError(
            f"labels must lie in [0, {num_classes}), found range [{lo}, {hi}]"
        )


def _logits(arch, mats, X):
    if arch == LOGREG:
        W, b = mats
        return X @ W + b, None
    W1, b1, W2, b2 = mats
    z1 = X @ W1 + b1
    a1 = np.maximum(z1, 0.0)
    return a1 @ W2 + b2, (z1, a1)


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward_loss(params: LayeredParams, batch: Batch) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and raw logits for a batch."""
    arch, mats = _unpack(list(params.arrays), params.names, batch.features.shape[1])
    num_classes = mats[-1].size
    _check_labels(batch.labels, num_classes)
    logits, _ = _logits(arch, mats, batch.features)
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    per_sample = lse - shifted[np.arange(len(batch)), batch.labels]
    return float(per_sample.mean()), logits


def _grad_arrays(arrays, names, X, y) -> list[np.ndarray]:
    """Gradient of the mean cross-entropy w.r.t. each flat layer."""
    arch, mats = _unpack(arrays, names, X.shape[1])
    num_classes = mats[-1].size
    _check_labels(y, num_classes)
    logits, cache = _logits(arch, mats, X)
    probs = _softmax(logits)
    n = X.shape[0]
    dlogits = probs
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    if arch == LOGREG:
        gW = X.T @ dlogits
        gb = dlogits.sum(axis=0)
        return [gW.reshape(-1), gb]
    W1, b1, W2, b2 = mats
    z1, a1 = cache
    gW2 = a1.T @ dlogits
    gb2 = dlogits.sum(axis=0)
    da1 = dlogits @ W2.T
    dz1 = da1 * (z1 > 0)  # ReLU subgradient: 0 at the kink
    gW1 = X.T @ dz1
    gb1 = dz1.sum(axis=0)
    return [gW1.reshape(-1), gb1, gW2.reshape(-1), gb2]


def backward(params: LayeredParams, batch: Batch) -> LayeredParams:
    """Gradient of forward_loss w.r.t. params, same layer layout."""
    grads = _grad_arrays(list(params.arrays), params.names, batch.features, batch.labels)
    return LayeredParams(zip(params.names, grads))


def local_train(
    params: LayeredParams,
    data: Batch,
    cfg: TrainConfig,
    rng: RandomSource,
) -> LayeredParams:
    """Run local_epochs passes of shuffled mini-batch SGD with momentum.

    The momentum buffer starts at zero on every call (clients are stateless
    between rounds). Per-epoch sample order is one permutation drawn from
    ``rng``; the final short batch is kept. Input params are unmodified.
    """
    n = len(data)
    if n == 0:
        raise ValueError("client dataset is empty")
    arrays = params.copy_arrays()
    velocity = [np.zeros_like(a) for a in arrays]
    lr, mu = cfg.learning_rate, cfg.momentum
    for _ in range(cfg.local_epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            grads = _grad_arrays(arrays, params.names, data.features[idx], data.labels[idx])
            for w, v, g in zip(arrays, velocity, grads):
                v *= mu
                v += g
                w -= lr * v
    return LayeredParams(zip(params.names, arrays))


def predict_logits(params: LayeredParams, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    arch, mats = _unpack(list(params.arrays), params.names, X.shape[1])
    logits, _ = _logits(arch, mats, X)
    return logits


def predict(params: LayeredParams, features) -> np.ndarray:
    """Argmax class ids; ties break to the lowest class index."""
    return np.argmax(predict_logits(params, features), axis=1)


def evaluate(params: LayeredParams, test_set: Batch) -> float:
    """Fraction of argmax-correct predictions on a nonempty test set."""
    if len(test_set) == 0:
        raise ValueError("test set is empty")
    pred = predict(params, test_set.features)
    return float(np.mean(pred == test_set.labels))
