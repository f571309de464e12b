"""Splittable, seeded random streams.

Every stochastic routine in the package takes a :class:`RandomStream`
explicitly. Streams are keyed by ``(seed, path)``: a child obtained with
:meth:`RandomStream.split` depends only on its parent's key and the split
labels, never on how many numbers the parent has already drawn. That is
what lets independent blocks or replicates be computed in any order, or in
parallel, with bit-identical results.
"""

from __future__ import annotations

import zlib
from typing import Union

import numpy as np

Key = Union[int, str]


def _key_to_int(key: Key) -> int:
    if isinstance(key, (bool, np.bool_)):
        raise TypeError("boolean split keys are ambiguous")
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("split keys must be non-negative")
        return int(key)
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    raise TypeError(f"unsupported split key {key!r}")


class RandomStream:
    """Counter-based (Philox) generator addressed by a seed and a key path."""

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        if int(seed) < 0:
            raise ValueError("seed must be non-negative")
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.generator = np.random.Generator(np.random.Philox(seq))

    def split(self, *keys: Key) -> "RandomStream":
        return RandomStream(self.seed, self.path + tuple(_key_to_int(k) for k in keys))

    def standard_normal(self, size) -> np.ndarray:
        return self.generator.standard_normal(size)

    def normal(self, scale: float, size) -> np.ndarray:
        return self.generator.normal(0.0, scale, size)

    def uniform(self, size=None, low: float = 0.0, high: float = 1.0):
        return self.generator.uniform(low, high, size)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, path={self.path})"


def as_stream(rng: "RandomStream | int | None") -> RandomStream:
    """Coerce an int seed (or ``None`` -> seed 0) to a :class:`RandomStream`."""
    if isinstance(rng, RandomStream):
        return rng
    if rng is None:
        return RandomStream(0)
    return RandomStream(int(rng))
