"""Counter-based Gaussian increments.

Each (seed, replica) pair owns a Philox key; the counter encodes the block
of steps, so any block can be regenerated without drawing the ones before
it and results do not depend on how replicas are scheduled.
"""

from __future__ import annotations

import numpy as np

BLOCK = 1024


def _key(seed: int, replica: int) -> np.ndarray:
    return np.random.SeedSequence([int(seed) & (2**64 - 1), int(replica)]).generate_state(2, np.uint64)


def block_normals(seed: int, replica: int, block: int, m: int) -> np.ndarray:
    """Standard normals of shape (BLOCK, m) for one block of steps."""
    bg = np.random.Philox(key=_key(seed, replica), counter=[0, 0, 0, int(block)])
    return np.random.Generator(bg).standard_normal((BLOCK, m))


def normals(seed: int, replica: int, start: int, n: int, m: int) -> np.ndarray:
    """Rows ``start .. start+n-1`` of the replica's infinite normal sequence."""
    out = np.empty((n, m))
    if n == 0 or m == 0:
        return out
    b0 = start // BLOCK
    b1 = (start + n - 1) // BLOCK
    pos = 0
    for b in range(b0, b1 + 1):
        blk = block_normals(seed, replica, b, m)
        lo = max(start, b * BLOCK) - b * BLOCK
        hi = min(start + n, (b + 1) * BLOCK) - b * BLOCK
        out[pos:pos + hi - lo] = blk[lo:hi]
        pos += hi - lo
    return out


def wiener_increments(seed: int, replica: int, start: int, n: int, m: int, dt: float) -> np.ndarray:
    return normals(seed, replica, start, n, m) * np.sqrt(dt)


class IncrementStream:
    """Sequential reader over blocks for one or many replicas."""

    def __init__(self, seed: int, replicas, m: int, dt: float):
        self.seed = int(seed)
        self.replicas = list(replicas)
        self.m = m
        self.sqdt = np.sqrt(dt)
        self._block = -1
        self._cache = None

    def step(self, i: int) -> np.ndarray:
        """Increments for step ``i``, shape (len(replicas), m)."""
        b = i // BLOCK
        if b != self._block:
            self._cache = np.stack(
                [block_normals(self.seed, r, b, self.m) for r in self.replicas], axis=1
            ) * self.sqdt
            self._block = b
        return self._cache[i - b * BLOCK]
