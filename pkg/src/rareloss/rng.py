"""Seedable, counter-based random streams.

Every stream is a Philox counter-based generator whose 128-bit key is
derived from ``(seed, stream_id, *path)`` through numpy's SeedSequence.
Streams are plain values: building the generator twice yields the same
draws, and distinct ids (or sub-paths) yield independent sequences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_U64 = (1 << 64) - 1

# Reserved stream ids for auxiliary passes, so toggling them never shifts
# the draws of replication r (which uses stream_id = r).
GAMMA_PASS_STREAM = _U64
PILOT_STREAM = _U64 - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self):
        for v in (self.seed, self.stream_id, *self.path):
            if not 0 <= int(v) <= _U64:
                raise ValueError(f"stream key component {v} is not a 64-bit unsigned integer")

    def _key(self) -> np.ndarray:
        ss = np.random.SeedSequence(
            entropy=int(self.seed), spawn_key=(int(self.stream_id), *map(int, self.path))
        )
        return ss.generate_state(2, dtype=np.uint64)

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        return np.random.Generator(np.random.Philox(key=self._key()))

    def substream(self, index: int) -> "RngStream":
        """Child stream, independent of the parent and of its siblings."""
        return RngStream(self.seed, self.stream_id, self.path + (int(index),))

    def replication(self, r: int) -> "RngStream":
        return RngStream(self.seed, int(r), self.path)


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a Generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return RngStream(0 if rng is None else int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")
