"""Seed derivation: every random stream is keyed by a tuple of ints/strings."""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_to_int(key) -> int:
    if isinstance(key, str):
        return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")
    return int(key) & _MASK64


def make_rng(*keys) -> np.random.Generator:
    return np.random.default_rng([_key_to_int(k) for k in keys])


def derive_seed(master: int, label: str) -> int:
    """Stable 31-bit component seed from a master seed and a component label."""
    digest = hashlib.sha256(f"{int(master)}:{label}".encode()).digest()
    return int.from_bytes(digest[:4], "little") & 0x7FFFFFFF
