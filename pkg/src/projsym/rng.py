"""Seedable random streams with reproducible substreams.

Every stream is identified by a root seed and a path of non-negative integers.
The underlying generator is PCG64 seeded from ``SeedSequence(seed, spawn_key=path)``,
so a substream's output depends only on its identity, never on how many other
streams were created before it or on which thread created it.
"""

from __future__ import annotations

import numpy as np

# Top-level namespaces. Trial i of a projection batch lives at (TRIALS, i).
TRIALS = 0
HAAR = 1
EXACT = 2
PERMUTATION = 3
X_VECTOR = 4
RETRY = 5


class RandomStream:
    """A named, single-owner random generator.

    Parameters
    ----------
    seed : int
        Root seed (any non-negative integer, 64-bit or larger).
    path : tuple of int
        Substream coordinates below the root.
    """

    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        seed = int(seed)
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = seed
        self.path = tuple(int(i) for i in path)
        ss = np.random.SeedSequence(seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def substream(self, *index: int) -> "RandomStream":
        """Return the independent child stream at ``path + index``."""
        return RandomStream(self.seed, self.path + index)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def standard_normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, path={self.path})"


def trial_stream(seed: int, index: int) -> RandomStream:
    """Substream used by trial ``index`` of a projection batch."""
    return RandomStream(seed, (TRIALS, index))
