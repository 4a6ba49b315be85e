"""Portable 64-bit PRNG so generated inputs are identical everywhere.

State is seeded with one SplitMix64 step (so seed 0 is fine) and advanced with
xorshift64* (shifts 12, 25, 27; multiplier 0x2545F4914F6CDD1D).
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1
XORSHIFT_MULT = 0x2545F4914F6CDD1D


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class XorShift64Star:
    def __init__(self, seed: int):
        state = splitmix64(seed & MASK64)
        self.state = state or 1

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * XORSHIFT_MULT) & MASK64

    def uniform(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def symmetric(self) -> float:
        """Uniform double in [-1, 1)."""
        return 2.0 * self.uniform() - 1.0

    def complex_matrix(self, n: int) -> list[list[complex]]:
        # row-major, real part drawn before imaginary part
        return [[complex(self.symmetric(), self.symmetric()) for _ in range(n)] for _ in range(n)]
