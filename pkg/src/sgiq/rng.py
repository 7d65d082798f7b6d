"""Named random sub-streams derived from one root seed."""

from __future__ import annotations

import zlib

import numpy as np


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def substream(seed: int, *names: str | int) -> np.random.Generator:
    """Return an independent Philox generator for ``seed`` and a name path.

    The same ``(seed, names)`` always yields the same stream; different names
    give statistically independent streams, so adding draws in one component
    never shifts another.
    """
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for n in names:
        key.append(stream_key(n) if isinstance(n, str) else int(n))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def int_seed(rng: np.random.Generator) -> int:
    """Draw a 32-bit integer seed for libraries that take plain ints."""
    return int(rng.integers(0, 2**31 - 1))
