"""Named, splittable random streams.

Every consumer of randomness asks for a stream by ``(seed, purpose, index)``.
Streams are built from :class:`numpy.random.SeedSequence` spawn keys, so a
new purpose or a new index never shifts the draws of an existing one.
"""

import zlib

import numpy as np


def _purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Return an independent generator for ``(seed, purpose, index)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_purpose_key(purpose), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, purpose: str, index: int = 0) -> int:
    """Hash ``(seed, purpose, index)`` into a fresh 63-bit integer seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_purpose_key(purpose), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
