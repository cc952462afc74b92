"""Named random streams derived from one root seed.

Stream ``name`` uses ``SeedSequence(root, spawn_key=(crc32(name),))``; path
``i`` of that stream uses ``spawn_key=(crc32(name), i)``.  The scheme depends
only on the root seed and the stream name, so adding a stream never perturbs
the others.
"""
from __future__ import annotations

import zlib

import numpy as np

from .errors import ValidationError

__all__ = ["SeedStreams", "as_generator"]

_MAX_SEED = 2**64


def _check_root(root) -> int:
    if isinstance(root, bool) or not isinstance(root, (int, np.integer)):
        raise ValidationError("seed must be an integer")
    root = int(root)
    if not 0 <= root < _MAX_SEED:
        raise ValidationError("seed must be an unsigned 64-bit integer")
    return root


class SeedStreams:
    """Factory of reproducible generators keyed by name (and optional index)."""

    def __init__(self, root: int):
        self.root = _check_root(root)

    def __repr__(self) -> str:
        return f"SeedStreams({self.root})"

    @staticmethod
    def key(name: str) -> int:
        return zlib.crc32(name.encode("utf-8"))

    def seed_sequence(self, name: str, index: int | None = None) -> np.random.SeedSequence:
        spawn = (self.key(name),) if index is None else (self.key(name), int(index))
        return np.random.SeedSequence(self.root, spawn_key=spawn)

    def rng(self, name: str, index: int | None = None) -> np.random.Generator:
        return np.random.default_rng(self.seed_sequence(name, index))

    def child(self, name: str) -> "SeedStreams":
        """Independent sub-factory, for handing streams to a component."""
        state = self.seed_sequence(name).generate_state(2, dtype=np.uint32)
        return SeedStreams(int(state[0]) << 32 | int(state[1]))


def as_generator(seed) -> np.random.Generator:
    """Accept an int seed, a SeedSequence or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(_check_root(seed))
