"""Seeded, splittable random streams.

A stream is named by a seed and a path of non-negative integers, e.g.
``(chain, iteration, purpose, t)``. Equal names give equal draws; different
paths give statistically independent generators that can be used from
different threads without coupling their draw order.
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import Tuple

import numpy as np

from ehmm.core.errors import UsageError

_U64 = 2**64


class Purpose(IntEnum):
    """Stream path component naming what the draws are used for."""

    POOL = 0
    PATH = 1
    PROPOSAL = 2
    SIMULATE = 3
    ORACLE = 4


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream."""

    seed: int
    stream_id: Tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < _U64:
            raise UsageError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if any(int(k) < 0 for k in self.stream_id):
            raise UsageError(f"stream id components must be non-negative: {self.stream_id}")

    def child(self, *keys: int) -> "RngStream":
        """Derive the stream one level further down the path."""
        return RngStream(self.seed, tuple(self.stream_id) + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        """Materialise the stream as a counter-based numpy generator."""
        seq = np.random.SeedSequence(int(self.seed), spawn_key=tuple(self.stream_id))
        return np.random.Generator(np.random.Philox(seq))
