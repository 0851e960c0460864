"""Portable, counter-based pseudo-random generator.

Every stochastic piece of the kit (parameter init, synthetic data,
augmentation, shuffling) draws from this generator so that a fixed integer
seed reproduces the exact same bits on any platform or implementation.

The algorithm is splitmix64 used in counter mode:

    value(k) = mix64((key + (k + 1) * 0x9E3779B97F4A7C15) mod 2**64)

where mix64 is the standard splitmix64 finalizer

    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    z ^= z >> 31

and `key` is the seed passed through mix64 once. Uniform doubles are
(value >> 11) * 2**-53, normals come from the Box-Muller cosine branch
(two uniforms per normal), and bounded integers are value mod bound.
All arithmetic is modulo 2**64, so numpy's uint64 wraparound reproduces
the reference definition exactly.
"""

from __future__ import annotations

import math

import numpy as np

_GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


def mix64(z: int) -> int:
    """splitmix64 finalizer on a python int (mod 2**64)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def _mix64_vec(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class PortableRng:
    """Deterministic stream of uniforms/normals/integers from a 64-bit seed."""

    def __init__(self, seed: int, _key: int | None = None, _counter: int = 0):
        self.seed = int(seed)
        self._key = mix64(self.seed) if _key is None else (_key & _MASK)
        self._counter = _counter

    def child(self, tag: int) -> "PortableRng":
        """Independent substream; same (seed, tag) always gives the same stream."""
        return PortableRng(self.seed, _key=mix64(self._key ^ mix64((tag + 1) & _MASK)))

    def u64(self, n: int) -> np.ndarray:
        """Next n raw 64-bit values as a uint64 array."""
        ks = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        return _mix64_vec(np.uint64(self._key) + ks * np.uint64(_GOLDEN))

    def uniform(self, shape=()) -> np.ndarray | float:
        """Doubles in [0, 1): (u64 >> 11) * 2**-53."""
        n = int(np.prod(shape)) if shape else 1
        vals = (self.u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return vals.reshape(shape) if shape else float(vals[0])

    def normal(self, shape=()) -> np.ndarray | float:
        """Standard normals via Box-Muller (cosine branch, 2 uniforms each)."""
        n = int(np.prod(shape)) if shape else 1
        u = (self.u64(2 * n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        u1, u2 = u[0::2], u[1::2]
        vals = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * math.pi * u2)
        return vals.reshape(shape) if shape else float(vals[0])

    def integers(self, bound: int, shape=()) -> np.ndarray | int:
        """Integers in [0, bound) via u64 mod bound."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        n = int(np.prod(shape)) if shape else 1
        vals = self.u64(n) % np.uint64(bound)
        return vals.reshape(shape).astype(np.int64) if shape else int(vals[0])

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        idx = np.arange(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            j = self.integers(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx
