"""Deterministic derivation of independent RNG streams from (seed, tags)."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_key(*parts) -> list[int]:
    """Stable list of uint32 entropy words from mixed int/str parts."""
    words: list[int] = []
    for part in parts:
        if isinstance(part, (int, np.integer)):
            words.append(int(part) & 0xFFFFFFFF)
            words.append((int(part) >> 32) & 0xFFFFFFFF)
        elif isinstance(part, str):
            digest = hashlib.sha256(part.encode()).digest()
            words.append(int.from_bytes(digest[:4], "little"))
        else:
            raise TypeError(f"unsupported key part {part!r}")
    return words


def derive_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_key(*parts))


def derive_seed(*parts) -> int:
    """Single int seed (for APIs that take one), stable across runs."""
    h = hashlib.sha256(repr(derive_key(*parts)).encode()).digest()
    return int.from_bytes(h[:8], "little")
