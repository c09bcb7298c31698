"""Seed handling.

Every stochastic routine takes an explicit ``numpy.random.Generator``. Work
that fans out over independent tasks (partitions, devices, trials) derives
one child stream per task from a master seed and the task's integer key, so
results never depend on scheduling order or worker count.
"""

import numpy as np

DEFAULT_SEED = 20240917


def make_rng(seed=None):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(DEFAULT_SEED if seed is None else seed)


def task_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the task identified by ``key``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) for k in key]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def spawn_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit integer seed from an existing generator."""
    return int(rng.integers(0, 2**63 - 1))
