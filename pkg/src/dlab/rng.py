"""Seeded random streams.

A stream is identified by ``(master_seed, stream_id)``; numpy's ``SeedSequence``
with ``spawn_key=(stream_id,)`` gives statistically independent substreams, and
identical pairs always reproduce the same bytes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_id),))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    def child(self, stream_id: int) -> "RngStream":
        """Substream keyed by the 64-bit mix of this stream's id and ``stream_id``."""
        return RngStream(self.master_seed, mix64(self.stream_id, stream_id))


def mix64(a: int, b: int) -> int:
    """Stable 64-bit hash of an ordered integer pair."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(a).to_bytes(8, "little"))
    h.update(int(b).to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


def stable_hash64(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an RngStream or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"expected Generator, RngStream or int seed, got {type(rng).__name__}")
