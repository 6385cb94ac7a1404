"""Seeded random streams. One integer seed fans out into named substreams."""
from __future__ import annotations

import zlib

import numpy as np

SeededRng = np.random.Generator


def seeded_rng(seed: int) -> SeededRng:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def substream(seed: int, *tags: str | int) -> SeededRng:
    """Independent generator derived from (seed, tags); stable across runs and platforms."""
    entropy = [int(seed)]
    for tag in tags:
        if isinstance(tag, int):
            entropy.append(tag)
        else:
            entropy.append(zlib.crc32(tag.encode("utf-8")))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
