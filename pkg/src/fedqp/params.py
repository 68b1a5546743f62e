"""Flat float64 vectors, named layered parameter containers, and their arithmetic.

Determinism contract: every reduction in this module accumulates strictly
left-to-right in layer/index order, so repeated runs on the same platform
produce bit-identical results.
"""

from __future__ import annotations

import struct
from typing import Iterable, Iterator

import numpy as np

_MAGIC = b"FQLP"
_VERSION = 1


class ShapeMismatchError(ValueError):
    """Raised when two vectors or layered containers are not arithmetic-compatible."""


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def dot(x, y) -> float:
    """Inner product accumulated sequentially left-to-right.

    The fixed accumulation order (no pairwise/parallel reduction) keeps the
    result reproducible and makes dot(x, y) == dot(y, x) exact.
    """
    xv = as_vector(x, "x")
    yv = as_vector(y, "y")
    if xv.size != yv.size:
        raise ShapeMismatchError(f"length mismatch: {xv.size} vs {yv.size}")
    total = 0.0
    for a, b in zip(xv.tolist(), yv.tolist()):
        total += a * b
    return total


def norm_sq(x) -> float:
    """Squared Euclidean norm; defined as dot(x, x)."""
    return dot(x, x)


class LayeredParams:
    """Ordered list of named flat float64 vectors, one per model layer.

    Instances are immutable after construction: stored arrays are marked
    read-only. Two containers are arithmetic-compatible iff layer names,
    order, and per-layer lengths all match.
    """

    __slots__ = ("_names", "_arrays")

    def __init__(self, layers: Iterable[tuple[str, np.ndarray]]):
        names: list[str] = []
        arrays: list[np.ndarray] = []
        for name, values in layers:
            arr = np.array(values, dtype=np.float64, copy=True)
            if arr.ndim != 1:
                raise ValueError(f"layer '{name}' must be flat, got shape {arr.shape}")
            if arr.size and not np.isfinite(arr).all():
                raise ValueError(f"layer '{name}' contains non-finite entries")
            arr.setflags(write=False)
            names.append(str(name))
            arrays.append(arr)
        self._names = tuple(names)
        self._arrays = tuple(arrays)

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    @property
    def arrays(self) -> tuple[np.ndarray, ...]:
        return self._arrays

    def layers(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(zip(self._names, self._arrays))

    def layer(self, name: str) -> np.ndarray:
        try:
            return self._arrays[self._names.index(name)]
        except ValueError:
            raise KeyError(f"no layer named '{name}'") from None

    @property
    def total_size(self) -> int:
        return sum(a.size for a in self._arrays)

    def copy_arrays(self) -> list[np.ndarray]:
        """Writable per-layer copies, for in-place optimizer updates."""
        return [a.copy() for a in self._arrays]

    def __len__(self) -> int:
        return len(self._names)

    def __repr__(self) -> str:
        desc = ", ".join(f"{n}({a.size})" for n, a in self.layers())
        return f"LayeredParams[{desc}]"


def check_compatible(x: LayeredParams, y: LayeredParams) -> None:
    """Raise ShapeMismatchError naming the first offending layer."""
    if len(x) != len(y):
        raise ShapeMismatchError(
            f"layer count mismatch: {len(x)} vs {len(y)}"
        )
    for i, ((nx, ax), (ny, ay)) in enumerate(zip(x.layers(), y.layers())):
        if nx != ny:
            raise ShapeMismatchError(f"layer {i}: name '{nx}' vs '{ny}'")
        if ax.size != ay.size:
            raise ShapeMismatchError(
                f"layer {i} ('{nx}'): length {ax.size} vs {ay.size}"
            )


def axpy(a: float, x: LayeredParams, y: LayeredParams) -> LayeredParams:
    """Layer-wise a*x + y. Inputs are unmodified."""
    check_compatible(x, y)
    a = float(a)
    return LayeredParams(
        (name, a * ax + ay)
        for (name, ax), ay in zip(x.layers(), y.arrays)
    )


def subtract(x: LayeredParams, y: LayeredParams) -> LayeredParams:
    """Layer-wise x - y."""
    check_compatible(x, y)
    return LayeredParams(
        (name, ax - ay) for (name, ax), ay in zip(x.layers(), y.arrays)
    )


def zeros_like(x: LayeredParams) -> LayeredParams:
    return LayeredParams((name, np.zeros(a.size)) for name, a in x.layers())


def params_norm(x: LayeredParams) -> float:
    """Global L2 norm over all layers, accumulated in layer order."""
    total = 0.0
    for _, arr in x.layers():
        total += norm_sq(arr)
    return float(np.sqrt(total))


def params_equal(x: LayeredParams, y: LayeredParams) -> bool:
    """Exact equality of structure and values."""
    if x.names != y.names:
        return False
    return all(np.array_equal(ax, ay) for ax, ay in zip(x.arrays, y.arrays))


def save_params(path, params: LayeredParams) -> None:
    """Write the documented binary format.

    Layout (little-endian): magic b"FQLP", u32 version, u32 layer count,
    then a header of (u32 name length, utf-8 name, u64 vector length) per
    layer, then each layer's float64 values in order. Round-trips bit-exactly.
    """
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(params)))
        for name, arr in params.layers():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<Q", arr.size))
        for arr in params.arrays:
            fh.write(arr.astype("<f8", copy=False).tobytes())


def load_params(path) -> LayeredParams:
    """Read the binary format written by :func:`save_params`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"bad magic {magic!r}; not a layered-params file")
        version, n_layers = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise ValueError(f"unsupported version {version}")
        header: list[tuple[str, int]] = []
        for _ in range(n_layers):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (size,) = struct.unpack("<Q", fh.read(8))
            header.append((name, size))
        layers = []
        for name, size in header:
            data = fh.read(8 * size)
            if len(data) != 8 * size:
                raise ValueError(f"truncated data for layer '{name}'")
            layers.append((name, np.frombuffer(data, dtype="<f8")))
        return LayeredParams(layers)
