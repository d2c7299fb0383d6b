"""Seed derivation.

Every random stream in the package comes from a root seed plus an integer
index, mixed with the splitmix64 finalizer.  Streams are therefore
independent of the order in which tasks are scheduled.
"""
import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state):
    """One splitmix64 output for a 64-bit state."""
    z = (state + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed, *indices):
    """Child seed for ``seed`` at the (possibly nested) position ``indices``."""
    s = int(seed) & MASK64
    for i in indices:
        s = splitmix64(s ^ splitmix64((int(i) * _GOLDEN) & MASK64))
    return s


def make_rng(seed, *indices):
    return np.random.default_rng(derive_seed(seed, *indices) if indices else int(seed) & MASK64)
