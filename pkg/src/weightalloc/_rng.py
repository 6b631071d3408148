"""Seed derivation and generator construction.

Streams are numpy Philox generators keyed by 64-bit seeds.  Child seeds
come from folding keys through the SplitMix64 finaliser, so a replication
index maps to the same stream no matter which worker draws it.
"""
import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, *keys: int) -> int:
    """Mix ``master`` with integer keys into an independent 64-bit seed."""
    h = splitmix64(int(master) & _MASK)
    for k in keys:
        h = splitmix64(h ^ (int(k) & _MASK))
    return h


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK))
