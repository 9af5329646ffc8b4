"""Counter-based SplitMix64 random streams.

Reproducibility contract: a stream is a pure function of (seed, counter).
The k-th 64-bit output is

    x   = seed + (counter + k + 1) * 0x9E3779B97F4A7C15   (mod 2^64)
    z   = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9            (mod 2^64)
    z   = (z ^ (z >> 27)) * 0x94D049BB133111EB            (mod 2^64)
    out =  z ^ (z >> 31)

so runs are bit-identical on every platform with 64-bit integer wraparound,
independent of numpy version or draw batching. Uniforms take the top 53 bits;
normals come from Box-Muller pairs.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class SplitMix64:
    """Seedable deterministic generator; see module docstring for the map."""

    def __init__(self, seed: int):
        self._seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self._counter = 0

    def next_u64(self, n: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            x = self._seed + idx * _GOLDEN
            z = (x ^ (x >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            return z ^ (z >> np.uint64(31))

    def uniform(self, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        return lo + (hi - lo) * u

    def standard_normal(self, n: int) -> np.ndarray:
        m = (n + 1) // 2
        # u1 in (0, 1] so log never sees zero
        u1 = ((self.next_u64(m) >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53
        u2 = (self.next_u64(m) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
        return out[:n]

    def normal_matrix(self, rows: int, cols: int, std: float = 1.0) -> np.ndarray:
        return (std * self.standard_normal(rows * cols)).reshape(rows, cols)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.next_u64(n), kind="stable")
