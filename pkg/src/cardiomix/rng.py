"""Deterministic 64-bit PRNG (splitmix64) with keyed substreams.

Every randomized operation in the package draws from a :class:`Stream`. The
algorithm, the substream derivation, and each operation's draw order are
frozen in ``docs/FORMAT.md`` so that runs are reproducible bit-for-bit across
platforms and can be re-implemented in any language.

A stream is counter-based: the n-th output is ``mix64(key + n * GAMMA)``.
Substreams derive from the parent *key* alone, so how much of a parent has
been consumed never affects its children; that is what makes per-sample
parallelism schedule-independent.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """splitmix64 finalizer; a bijection on 64-bit integers."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MUL1) & _MASK
    z = ((z ^ (z >> 27)) * _MUL2) & _MASK
    return z ^ (z >> 31)


def _mix64_block(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps mod 2**64, matching the scalar path exactly
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MUL1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MUL2)
    return z ^ (z >> np.uint64(31))


class Stream:
    """Keyed splitmix64 stream with uniform/normal helpers and substreams."""

    __slots__ = ("key", "_n")

    def __init__(self, key: int) -> None:
        self.key = int(key) & _MASK
        self._n = 0

    def child(self, index: int) -> "Stream":
        """Substream ``index``; independent of this stream's consumed state."""
        return Stream(mix64(self.key ^ mix64(((index + 1) * GAMMA) & _MASK)))

    def next_u64(self) -> int:
        self._n += 1
        return mix64((self.key + self._n * GAMMA) & _MASK)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) via the multiply-shift bound."""
        if n <= 0:
            raise ValueError("below() requires a positive bound")
        return (self.next_u64() * n) >> 64

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both endpoints inclusive."""
        if hi < lo:
            raise ValueError(f"empty integer range [{lo}, {hi}]")
        return lo + self.below(hi - lo + 1)

    def uniform(self) -> float:
        """Float in [0, 1) carrying the top 53 bits of one output."""
        return (self.next_u64() >> 11) * 2.0**-53

    def u64_block(self, n: int) -> np.ndarray:
        """Next ``n`` raw outputs as uint64; identical to n next_u64() calls."""
        idx = np.arange(self._n + 1, self._n + n + 1, dtype=np.uint64)
        self._n += n
        with np.errstate(over="ignore"):
            return _mix64_block(np.uint64(self.key) + idx * np.uint64(GAMMA))

    def uniform_block(self, n: int) -> np.ndarray:
        """Next ``n`` floats in [0, 1), consistent with uniform()."""
        return (self.u64_block(n) >> np.uint64(11)) * 2.0**-53

    def normal_block(self, n: int) -> np.ndarray:
        """``n`` standard normals via Box-Muller.

        Pair j consumes uniforms (2j, 2j+1) and yields (r*cos, r*sin); an odd
        trailing element discards the sine half.
        """
        m = (n + 1) // 2
        u = self.uniform_block(2 * m)
        u1, u2 = u[0::2], u[1::2]
        r = np.sqrt(-2.0 * np.log1p(-u1))
        theta = (2.0 * np.pi) * u2
        out = np.empty(2 * m, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]
