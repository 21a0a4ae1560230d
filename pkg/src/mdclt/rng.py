"""Reproducible 64-bit random streams.

xoshiro256++ seeded through a splitmix64 expansion.  The generator is fixed by
algorithm so that a seed always yields the same words on every platform.
Substream ``r`` of a master seed is the stream seeded with ``seed ^ r``.

Two views of the same generator are provided:

* :class:`RngStream` -- one stream, pure Python integers.
* :class:`LaneStreams` -- many independent streams advanced in lock step with
  numpy ``uint64`` arithmetic, one lane per replication.

Lane ``i`` of ``LaneStreams(seeds)`` produces exactly the words of
``RngStream(seeds[i])``.
"""
from __future__ import annotations

from collections.abc import Iterable

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO_M52 = 2.0**-52


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; return ``(new_state, output)``."""
    state = (state + _GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return state, z ^ (z >> 31)


def expand_seed(seed: int) -> tuple[int, int, int, int]:
    """Four splitmix64 outputs used as the xoshiro256++ state."""
    state = int(seed) & MASK64
    words = []
    for _ in range(4):
        state, out = splitmix64(state)
        words.append(out)
    if not any(words):
        # all-zero state is a fixed point of xoshiro; splitmix64 never yields it
        # for four consecutive outputs, but guard anyway
        words[0] = 1
    return tuple(words)  # type: ignore[return-value]


def substream_seed(seed: int, index: int) -> int:
    return (int(seed) ^ int(index)) & MASK64


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def words_to_uniform(words: np.ndarray) -> np.ndarray:
    """Map 64-bit words to doubles in the open interval (0, 1).

    Uses the top 52 bits so that the bin midpoint is exact; with 53 bits the
    largest word would round up to 1.0.
    """
    top = (np.asarray(words, dtype=np.uint64) >> np.uint64(12)).astype(np.float64)
    return (top + 0.5) * _TWO_M52


class RngStream:
    """A single xoshiro256++ stream.

    Single owner: never share one stream between replications or threads.
    """

    __slots__ = ("seed", "_s")

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self._s = list(expand_seed(self.seed))

    @classmethod
    def substream(cls, seed: int, index: int) -> RngStream:
        return cls(substream_seed(seed, index))

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s0 + s3) & MASK64, 23) + s0) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def u64(self, m: int) -> np.ndarray:
        return np.fromiter((self.next_u64() for _ in range(m)), dtype=np.uint64, count=m)

    def uniform(self, m: int | None = None):
        if m is None:
            return float(words_to_uniform(np.array([self.next_u64()], dtype=np.uint64))[0])
        return words_to_uniform(self.u64(m))

    def state(self) -> tuple[int, int, int, int]:
        return tuple(self._s)  # type: ignore[return-value]


class LaneStreams:
    """Independent xoshiro256++ streams advanced together.

    ``u64(m)`` returns an array of shape ``(lanes, m)``; column ``j`` holds the
    ``j``-th word drawn by every lane.
    """

    def __init__(self, seeds: Iterable[int]):
        seeds = [int(s) & MASK64 for s in seeds]
        if not seeds:
            raise ValueError("LaneStreams needs at least one seed")
        state = np.array([expand_seed(s) for s in seeds], dtype=np.uint64)
        self.seeds = seeds
        self._s0 = state[:, 0].copy()
        self._s1 = state[:, 1].copy()
        self._s2 = state[:, 2].copy()
        self._s3 = state[:, 3].copy()

    @classmethod
    def substreams(cls, seed: int, indices: Iterable[int]) -> LaneStreams:
        return cls(substream_seed(seed, r) for r in indices)

    @property
    def lanes(self) -> int:
        return self._s0.shape[0]

    def u64(self, m: int) -> np.ndarray:
        out = np.empty((self.lanes, m), dtype=np.uint64)
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        k17, k23, k41, k45, k19 = (np.uint64(v) for v in (17, 23, 41, 45, 19))
        with np.errstate(over="ignore"):
            for j in range(m):
                a = s0 + s3
                out[:, j] = ((a << k23) | (a >> k41)) + s0
                t = s1 << k17
                s2 ^= s0
                s3 ^= s1
                s1 ^= s2
                s0 ^= s3
                s2 ^= t
                s3 = (s3 << k45) | (s3 >> k19)
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return out

    def uniform(self, m: int) -> np.ndarray:
        return words_to_uniform(self.u64(m))
