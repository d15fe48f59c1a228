"""Named, splittable random streams on a counter-based generator.

Every consumer of randomness (scene generation, weight init, latent
sampling, click simulation) derives its own child stream by name, so
streams never interfere and any subtree of the computation can be
reproduced in isolation.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["RngStream"]


def _name_to_key(name: str) -> int:
    # Stable across processes and Python versions (hash() is salted).
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class RngStream:
    """A reproducible random stream identified by a seed and a name path.

    ``child(name)`` derives an independent stream; deriving the same name
    twice gives the same stream. The underlying bit generator is Philox
    (counter-based), so draws are independent of platform and of what
    other streams have consumed.
    """

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self._path = _path
        self._gen: np.random.Generator | None = None

    def child(self, name: str) -> "RngStream":
        return RngStream(self.seed, self._path + (_name_to_key(name),))

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            key = np.random.SeedSequence(entropy=self.seed, spawn_key=self._path)
            self._gen = np.random.Generator(np.random.Philox(key))
        return self._gen

    def normal(self, shape=(), dtype=np.float64) -> np.ndarray:
        return self.generator.standard_normal(shape).astype(dtype, copy=False)

    def uniform(self, low=0.0, high=1.0, shape=()) -> np.ndarray:
        return self.generator.uniform(low, high, shape)

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        """Uniform integers in [low, high] inclusive."""
        return self.generator.integers(low, high, shape, endpoint=True)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self.generator.choice(n, size=size, replace=replace)

    def shuffle(self, items: list) -> None:
        self.generator.shuffle(items)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, depth={len(self._path)})"
