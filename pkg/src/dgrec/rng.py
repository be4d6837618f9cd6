"""Counter-based random streams.

Every random decision in the package (neighbor sampling, holdout shuffles,
dropout masks, epoch shuffles, parameter init) is drawn from a
Philox4x64-10 bit generator keyed by ``(seed, stream)``. Only the raw 64-bit
outputs of the generator are consumed, and all transformations on top of
them are defined here, so results do not depend on numpy's
``Generator`` method implementations:

* ``below(n)``: ``(raw * n) >> 64`` (multiply-shift, bias < n / 2**64)
* ``uniform``: ``(raw >> 11) * 2**-53``
* permutations: Fisher-Yates from the last index down, using ``below``
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def stream_id(*tags: int | str) -> int:
    """Fold an arbitrary tuple of ints/strings into one 64-bit stream id."""
    h = 0x243F6A8885A308D3
    for tag in tags:
        if isinstance(tag, str):
            for byte in tag.encode("utf-8"):
                h = _splitmix64(h ^ byte)
            h = _splitmix64(h ^ 0xFF)
        else:
            h = _splitmix64(h ^ (int(tag) & _MASK64))
    return h


class CounterRNG:
    """Deterministic random stream keyed by a seed and a tag tuple."""

    def __init__(self, seed: int, *tags: int | str):
        key = (int(seed) & _MASK64) | (stream_id(*tags) << 64)
        self._bg = np.random.Philox(key=key)

    def raw(self, n: int) -> np.ndarray:
        return self._bg.random_raw(n).astype(np.uint64)

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("below() needs n >= 1")
        r = int(self._bg.random_raw())
        return (r * n) >> 64

    def uniform(self, size) -> np.ndarray:
        count = int(np.prod(size)) if np.ndim(size) else int(size)
        bits = self._bg.random_raw(count) >> np.uint64(11)
        return (bits.astype(np.float64) * 2.0**-53).reshape(size)

    def permutation(self, n: int) -> list[int]:
        out = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            out[i], out[j] = out[j], out[i]
        return out

    def sample_without_replacement(self, population: list, k: int) -> list:
        """Partial Fisher-Yates: the first k slots of a shuffled copy."""
        pool = list(population)
        n = len(pool)
        if k > n:
            raise ValueError(f"cannot draw {k} items without replacement from {n}")
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def sample_with_replacement(self, population: list, k: int) -> list:
        n = len(population)
        return [population[self.below(n)] for _ in range(k)]
