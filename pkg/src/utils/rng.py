"""
Seeded random number source.

All randomness in the package (parameter initialisation, data synthesis,
batch shuffling, grad-check coordinate sampling) is drawn from ``Rng``, a thin
wrapper over numpy's PCG64 bit generator. PCG64 is a permuted congruential
generator with a 128-bit state; numpy documents its stream as stable across
platforms for a given seed.
"""

from typing import List, Sequence

import numpy as np

ALGORITHM = "PCG64"


class Rng:
    """Deterministic random stream.

    Args:
        seed: Non-negative integer below 2**64
    """

    algorithm = ALGORITHM

    def __init__(self, seed: int):
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self._seq = np.random.SeedSequence(self.seed)
        self._gen = np.random.Generator(np.random.PCG64(self._seq))

    @classmethod
    def _from_sequence(cls, seq: np.random.SeedSequence, seed: int) -> "Rng":
        rng = cls.__new__(cls)
        rng.seed = seed
        rng._seq = seq
        rng._gen = np.random.Generator(np.random.PCG64(seq))
        return rng

    def spawn(self, n: int) -> List["Rng"]:
        """Derive ``n`` independent child streams (one per video, per block, ...)."""
        return [Rng._from_sequence(child, self.seed) for child in self._seq.spawn(n)]

    def normal(self, size: Sequence[int], scale: float = 1.0, dtype=np.float32) -> np.ndarray:
        return (self._gen.standard_normal(size) * scale).astype(dtype)

    def uniform(self, low: float, high: float, size: Sequence[int], dtype=np.float32) -> np.ndarray:
        return self._gen.uniform(low, high, size).astype(dtype)

    def integers(self, low: int, high: int, size=None):
        """Integers in ``[low, high)``."""
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def unit_vector(self, dim: int, dtype=np.float32) -> np.ndarray:
        v = self._gen.standard_normal(dim)
        return (v / np.linalg.norm(v)).astype(dtype)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, algorithm={self.algorithm})"
