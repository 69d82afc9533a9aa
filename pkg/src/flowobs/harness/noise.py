"""Seeded measurement noise.

The generator is SplitMix64: a 64-bit state advanced by the constant
0x9E3779B97F4A7C15, each output passed through the finalizer

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

(all arithmetic mod 2**64).  A double in [0, 1) is the top 53 bits times
2**-53.  The algorithm is fixed so noise sequences are reproducible
across platforms and library versions.
"""
from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


def uniform_noise(n: int, amplitude: float, seed: int) -> np.ndarray:
    """``n`` samples uniform on [-amplitude, amplitude)."""
    if amplitude < 0:
        raise ValueError("noise amplitude must be non-negative")
    gen = SplitMix64(seed)
    return np.array([amplitude * (2.0 * gen.uniform() - 1.0) for _ in range(n)])
