"""Seedable random streams with order-independent derivation.

Each stream is a Philox counter-based generator keyed by
sha256(seed, stream id), so derived streams depend only on their label
path and never on the order or number of draws elsewhere. This is what
lets per-client and per-round streams be assigned independently of
execution order.
"""

from __future__ import annotations

import hashlib

import numpy as np


class RandomSource:
    """One deterministic stream per logical actor; never share instances."""

    __slots__ = ("seed", "stream", "_gen")

    def __init__(self, seed: int, stream: str = "root"):
        self.seed = int(seed)
        self.stream = stream
        digest = hashlib.sha256(f"{self.seed}|{stream}".encode("utf-8")).digest()
        key = int.from_bytes(digest[:16], "little")
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def derive(self, label: str) -> "RandomSource":
        """Fresh independent stream labelled '<stream>/<label>'."""
        return RandomSource(self.seed, f"{self.stream}/{label}")

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def uniform(self, size=None):
        return self._gen.random(size)

    def sign(self) -> float:
        """+1.0 or -1.0 with equal probability (one uniform draw)."""
        return 1.0 if self._gen.random() < 0.5 else -1.0

    def bernoulli(self, p: float) -> bool:
        """True with probability p (one uniform draw)."""
        return bool(self._gen.random() < p)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def dirichlet(self, alpha) -> np.ndarray:
        return self._gen.dirichlet(alpha)

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        return self._gen.choice(n, size=k, replace=False)

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, stream='{self.stream}')"
