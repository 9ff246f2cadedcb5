"""Counter-based random streams.

Every stream is a Philox generator whose key is derived from the master seed
and a tuple of integer stream ids (resistor index, bias point, trial, ...).
A draw therefore depends only on (seed, ids, position in stream) and never on
the order in which streams are created or consumed, which keeps parallel runs
reproducible.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def stream(seed: int, *ids: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & MASK64, spawn_key=tuple(int(i) & MASK64 for i in ids))
    key = ss.generate_state(2, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, *ids: int) -> int:
    """A 63-bit seed for the sub-task identified by ``ids``."""
    return int(stream(seed, *ids).integers(0, 2**63))


def first_below(seed_gen: np.random.Generator, probs: np.ndarray) -> int:
    """Index of the first uniform draw below its probability, or -1."""
    if len(probs) == 0:
        return -1
    hits = np.flatnonzero(seed_gen.random(len(probs)) < probs)
    return int(hits[0]) if len(hits) else -1


class UniformBlock:
    """Sequential uniform draws from a stream, fetched in blocks."""

    __slots__ = ("_gen", "_buf", "_pos", "_size")

    def __init__(self, gen: np.random.Generator, size: int = 1024):
        self._gen = gen
        self._size = size
        self._buf = gen.random(size)
        self._pos = 0

    def next(self) -> float:
        if self._pos == self._size:
            self._buf = self._gen.random(self._size)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u
