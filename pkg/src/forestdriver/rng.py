"""Deterministic random sources.

Every generator is ``numpy.random.Generator(PCG64(seed))``. Per-example seeds
are derived by hashing ``(global_seed, *keys)`` with SHA-256, so parallel or
reordered data loading draws the same numbers for the same example.
"""
import hashlib

import numpy as np


def derive_seed(global_seed, *keys) -> int:
    h = hashlib.sha256(repr((int(global_seed),) + tuple(str(k) for k in keys)).encode())
    return int.from_bytes(h.digest()[:8], "little")


def make_rng(seed, *keys) -> np.random.Generator:
    if keys:
        seed = derive_seed(seed, *keys)
    return np.random.Generator(np.random.PCG64(int(seed)))
