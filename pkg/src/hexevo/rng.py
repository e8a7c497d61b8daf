"""Named random streams derived from a single experiment seed.

Every source of randomness in a run is a stream addressed by
(seed, purpose, *indices).  Streams are independent of execution order,
so serial and parallel runs, and runs resumed from a checkpoint, draw
identical numbers.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _purpose_key(purpose: str) -> int:
    digest = hashlib.blake2b(purpose.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed: int, purpose: str, *indices: int) -> int:
    """Collapse a stream address into a plain 64-bit seed (for child configs)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed & _MASK64).to_bytes(8, "little"))
    h.update(purpose.encode("utf-8"))
    for idx in indices:
        h.update(int(idx & _MASK64).to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


def stream(seed: int, purpose: str, *indices: int) -> np.random.Generator:
    """Return the generator for one named stream."""
    key = (_purpose_key(purpose), *(int(i) & _MASK64 for i in indices))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed & _MASK64), spawn_key=key))
