"""Synthetic classification data and non-IID client partitioning.

Class-conditional Gaussians stand in for image benchmarks at desk scale.
Class means sit on scaled orthonormal axes (mean_c = s * e_c with
s = class_separation / sqrt(2)), so every pair of means is exactly
class_separation apart; this requires input_dim >= num_classes.

Partitioning follows the usual federated convention: per class, draw
client proportions from Dir(beta, ..., beta) and hand out contiguous
ranges of that class's shuffled indices, then repair empty clients by
moving one sample at a time from the largest client.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import Batch
from .rng import RandomSource

IID = "iid"
DIRICHLET = "dirichlet"
PARTITION_MODES = (IID, DIRICHLET)


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int
    input_dim: int
    samples_per_class: int
    class_separation: float
    noise_std: float

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.input_dim < self.num_classes:
            raise ValueError(
                "input_dim must be >= num_classes (class means are placed on "
                "orthonormal axes)"
            )
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")
        if self.class_separation <= 0:
            raise ValueError("class_separation must be > 0")
        if self.noise_std <= 0:
            raise ValueError("noise_std must be > 0")

    @property
    def num_samples(self) -> int:
        return self.num_classes * self.samples_per_class


@dataclass(frozen=True)
class PartitionSpec:
    num_clients: int
    mode: str = DIRICHLET
    beta: float = 0.5

    def __post_init__(self):
        if self.num_clients < 1:
            raise ValueError("num_clients must be >= 1")
        if self.mode not in PARTITION_MODES:
            raise ValueError(f"mode must be one of {PARTITION_MODES}")
        if self.mode == DIRICHLET and self.beta <= 0:
            raise ValueError("beta must be > 0")


@dataclass(frozen=True)
class ClientPartition:
    """Disjoint per-client sample index sets covering all training indices."""

    assignments: tuple[np.ndarray, ...]

    @property
    def num_clients(self) -> int:
        return len(self.assignments)

    @property
    def client_sizes(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.assignments)


def class_means(spec: SyntheticSpec) -> np.ndarray:
    """(num_classes x input_dim) matrix of deterministic class means."""
    scale = spec.class_separation / np.sqrt(2.0)
    means = np.zeros((spec.num_classes, spec.input_dim))
    means[np.arange(spec.num_classes), np.arange(spec.num_classes)] = scale
    return means


def generate(spec: SyntheticSpec, rng: RandomSource) -> tuple[np.ndarray, np.ndarray]:
    """Sample the dataset; class c occupies rows [c*m, (c+1)*m)."""
    means = class_means(spec)
    m = spec.samples_per_class
    features = np.empty((spec.num_samples, spec.input_dim))
    labels = np.empty(spec.num_samples, dtype=np.int64)
    for c in range(spec.num_classes):
        block = slice(c * m, (c + 1) * m)
        noise = rng.normal((m, spec.input_dim))
        features[block] = means[c] + spec.noise_std * noise
        labels[block] = c
    return features, labels


def _repair_empty_clients(per_client: list[list[int]]) -> None:
    """Move one sample from the largest client until every client has >= 1."""
    sizes = np.array([len(ix) for ix in per_client])
    while (sizes == 0).any():
        empty = int(np.argmin(sizes))
        donor = int(np.argmax(sizes))
        if sizes[donor] <= 1:
            raise ValueError("cannot repair partition: not enough samples")
        per_client[empty].append(per_client[donor].pop())
        sizes[empty] += 1
        sizes[donor] -= 1


def partition(labels, spec: PartitionSpec, rng: RandomSource) -> ClientPartition:
    """Split sample indices across clients, IID or per-class Dirichlet."""
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.size
    if n < spec.num_clients:
        raise ValueError(
            f"cannot partition {n} samples across {spec.num_clients} clients"
        )
    per_client: list[list[int]] = [[] for _ in range(spec.num_clients)]
    if spec.mode == IID:
        order = rng.permutation(n)
        base, extra = divmod(n, spec.num_clients)
        start = 0
        for i in range(spec.num_clients):
            size = base + (1 if i < extra else 0)
            per_client[i] = order[start : start + size].tolist()
            start += size
    else:
        alpha = np.full(spec.num_clients, spec.beta)
        for c in np.unique(labels):
            class_idx = np.flatnonzero(labels == c)
            shuffled = class_idx[rng.permutation(class_idx.size)]
            props = rng.dirichlet(alpha)
            cuts = np.floor(np.cumsum(props)[:-1] * class_idx.size).astype(int)
            for i, chunk in enumerate(np.split(shuffled, cuts)):
                per_client[i].extend(chunk.tolist())
        _repair_empty_clients(per_client)
    assignments = tuple(np.array(sorted(ix), dtype=np.int64) for ix in per_client)
    return ClientPartition(assignments)


@dataclass(frozen=True)
class HeterogeneityReport:
    """Per-client class histograms plus a scalar divergence summary."""

    client_histograms: np.ndarray  # (num_clients x num_classes) counts
    divergence: float  # mean client-vs-global total-variation distance


def heterogeneity_report(part: ClientPartition, labels) -> HeterogeneityReport:
    labels = np.asarray(labels, dtype=np.int64)
    num_classes = int(labels.max()) + 1
    hist = np.zeros((part.num_clients, num_classes), dtype=np.int64)
    for i, idx in enumerate(part.assignments):
        hist[i] = np.bincount(labels[idx], minlength=num_classes)
    global_dist = np.bincount(labels, minlength=num_classes) / labels.size
    client_dist = hist / hist.sum(axis=1, keepdims=True)
    tv = 0.5 * np.abs(client_dist - global_dist).sum(axis=1)
    return HeterogeneityReport(hist, float(tv.mean()))


def train_test_split(
    features, labels, test_fraction: float, rng: RandomSource
) -> tuple[Batch, Batch]:
    """Random split into (train, test); test gets round(n * test_fraction)."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.size
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    n_test = int(round(n * test_fraction))
    n_test = min(max(n_test, 1), n - 1)
    order = rng.permutation(n)
    test_idx, train_idx = order[:n_test], order[n_test:]
    return (
        Batch(features[train_idx], labels[train_idx]),
        Batch(features[test_idx], labels[test_idx]),
    )


def load_dataset_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a delimited text dataset: one sample per row, features then an
    integer label in the last column. Lines starting with '#' are comments."""
    raw = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if raw.shape[1] < 2:
        raise ValueError("dataset rows need at least one feature and a label")
    features = raw[:, :-1]
    labels_f = raw[:, -1]
    labels = labels_f.astype(np.int64)
    if not np.array_equal(labels_f, labels):
        raise ValueError("last column must hold integer class labels")
    if labels.min() < 0:
        raise ValueError("class labels must be non-negative")
    return features, labels


def save_partition(path, part: ClientPartition) -> None:
    """Audit export: one line per client, 'client_id: idx idx ...'."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, idx in enumerate(part.assignments):
            fh.write(f"{i}: {' '.join(str(j) for j in idx.tolist())}\n")


def load_partition(path) -> ClientPartition:
    assignments = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            _, _, rest = line.partition(":")
            assignments.append(np.array([int(t) for t in rest.split()], dtype=np.int64))
    return ClientPartition(tuple(assignments))
