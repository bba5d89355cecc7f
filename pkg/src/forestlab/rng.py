"""Reproducible random streams.

A stream is the pair (seed, stream_id). Streams are counter-based (Philox), so
any stream can be constructed directly without generating its predecessors;
replica i of an experiment always uses stream_id=i, which makes results
independent of how replicas are scheduled across threads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _mix64(a: int, b: int) -> int:
    # splitmix64 finalizer over the combined words; cheap, well-spread
    x = (a * 0x9E3779B97F4A7C15 + b) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        """Fresh Philox generator keyed by (seed, stream_id)."""
        key = np.random.SeedSequence([self.seed & _MASK64, self.stream_id & _MASK64])
        return np.random.Generator(np.random.Philox(key=key.generate_state(2, np.uint64)))

    def substream(self, index: int) -> "RngStream":
        """Derived stream; distinct (stream_id, index) pairs give distinct streams."""
        return RngStream(self.seed, _mix64(self.stream_id, index))

    def spawn(self, count: int) -> list["RngStream"]:
        return [self.substream(i) for i in range(count)]

    def kernel_seed(self, salt: int = 0) -> int:
        """64-bit seed for a jit kernel's own generator, derived from the stream."""
        key = np.random.SeedSequence([self.seed & _MASK64, self.stream_id & _MASK64, salt & _MASK64])
        return int(key.generate_state(1, np.uint64)[0])
