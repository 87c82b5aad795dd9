"""
Seeded generators and per-replica streams.
"""
import numpy as np

from .exceptions import InputError

MAX_SEED = 2**64 - 1


def make_rng(seed):
    """Master generator for a run; ``seed`` is a 64-bit unsigned integer."""
    if seed is None or not 0 <= int(seed) <= MAX_SEED:
        raise InputError(f'seed must be an integer in [0, 2**64 - 1], got {seed!r}', code='range')
    return np.random.default_rng(int(seed))


def replica_rngs(rng, reps):
    """
    Independent child generators, one per replica.

    Child ``i`` depends only on the parent's seed sequence, the number of
    earlier spawns and ``i``; the parent's own stream is not advanced.
    """
    return rng.spawn(reps)
