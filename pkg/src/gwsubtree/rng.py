"""Splittable seeding: one independent numpy stream per (seed, stream path)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SeededRng:
    """A reproducible random stream.

    The stream is fully determined by the master ``seed`` and the tuple of
    stream indices leading to it; distinct paths give independent streams
    through :class:`numpy.random.SeedSequence` spawn keys.
    """

    seed: int
    stream: int = 0
    parents: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def key(self) -> tuple[int, ...]:
        return self.parents + (self.stream,)

    def child(self, index: int) -> SeededRng:
        return SeededRng(self.seed, index, self.key)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng) -> np.random.Generator:
    """Accept a SeededRng, a numpy Generator or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, SeededRng):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return SeededRng(int(rng)).generator()
    raise TypeError(f"cannot make a random generator from {type(rng).__name__}")
