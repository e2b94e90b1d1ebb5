"""Seedable RNG streams with documented splitting.

Every stochastic routine in the package draws from ``stream(seed, *key)``.
The key is a tuple of ints/strings naming the consumer (e.g. ``("restart",
k)`` or ``("shots", "layer", p)``), so ensembles and replicas are replayable
and independent streams never collide.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_words(key: tuple) -> list[int]:
    words = []
    for part in key:
        if isinstance(part, (int, np.integer)):
            words.append(int(part) & 0xFFFFFFFF)
        elif isinstance(part, str):
            digest = hashlib.sha256(part.encode()).digest()
            words.append(int.from_bytes(digest[:4], "little"))
        else:
            raise TypeError(f"stream key parts must be int or str, got {type(part)!r}")
    return words


def stream(seed: int, *key: int | str) -> np.random.Generator:
    """Return an independent, reproducible generator for (seed, key)."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFF] + _key_words(key))
    return np.random.Generator(np.random.PCG64(ss))
