"""Keyed random streams.

Every consumer of randomness asks for a stream keyed on the master seed plus
a tuple describing *what* the draws are for (agent, day, patch, ...). Two
runs that share a seed therefore see identical draws for identical keys no
matter how many other draws happen elsewhere, which is what makes paired
scenario comparisons (common random numbers) and thread-count independence
work.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def _word(part) -> int:
    if isinstance(part, str):
        # never hash(): it is salted per process
        return zlib.crc32(part.encode("utf-8"))
    value = int(part)
    if value < 0:
        value &= _MASK64
    return value


def stream(seed: int, *key) -> np.random.Generator:
    """Return an independent generator for ``(seed, *key)``."""
    words = [_word(seed)] + [_word(k) for k in key]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))


def derive_seed(seed: int, *key) -> int:
    """Collapse a keyed stream into a plain 32-bit integer seed."""
    words = [_word(seed)] + [_word(k) for k in key]
    return int(np.random.SeedSequence(words).generate_state(1)[0])
