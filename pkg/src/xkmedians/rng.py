"""Seedable, splittable random streams.

Every randomized routine in this package takes an :class:`RngHandle`.  A
handle is identified by a master seed plus a spawn-key path, so a child
stream derived at a fixed path yields the same draws no matter in which
order sibling subtrees were processed.
"""

from __future__ import annotations

import numpy as np

__all__ = ["RngHandle"]


class RngHandle:
    """NumPy Generator wrapper keyed by (seed, spawn path)."""

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        self._seed = int(seed)
        self._path = _path
        ss = np.random.SeedSequence(self._seed, spawn_key=_path)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def path(self) -> tuple[int, ...]:
        return self._path

    def child(self, *key: int) -> "RngHandle":
        """Independent substream at a fixed path below this handle."""
        return RngHandle(self._seed, self._path + tuple(int(k) for k in key))

    # Thin pass-throughs for the draws the algorithms need.
    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def exponential(self, scale=1.0, size=None):
        return self.generator.exponential(scale, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def choice(self, a, size=None, replace=True, p=None):
        return self.generator.choice(a, size=size, replace=replace, p=p)

    def __repr__(self) -> str:
        return f"RngHandle(seed={self._seed}, path={self._path})"
