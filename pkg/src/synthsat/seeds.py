"""Deterministic seed derivation and named random streams.

All randomness in the package flows through numpy's PCG64 bit generator,
seeded from 64-bit values derived with SHA-256 over a canonical encoding of
the stream name parts.  Derivation is stable across hosts, Python builds and
thread counts, and adding a new stream never perturbs existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(*parts: int | str) -> int:
    """Derive a 64-bit seed from an ordered tuple of ints and strings."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bool) or not isinstance(part, (int, str)):
            raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")
        if isinstance(part, int):
            h.update(b"i")
            h.update((part & MASK64).to_bytes(8, "little"))
        else:
            raw = part.encode("utf-8")
            h.update(b"s")
            h.update(len(raw).to_bytes(4, "little"))
            h.update(raw)
    return int.from_bytes(h.digest()[:8], "little")


def rng_for(*parts: int | str) -> np.random.Generator:
    """Named PCG64 stream for the given seed parts."""
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))
