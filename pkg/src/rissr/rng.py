"""Seed-stream helpers for reproducible, order-insensitive experiments."""

import numpy as np


def spawn_rng(seed, *key):
    """Generator for the sub-stream addressed by (seed, key).

    Sub-streams with distinct keys are statistically independent, and the
    stream obtained for a given key does not depend on how many other keys
    were used before it.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def spawn_seed(seed, *key):
    """Stable integer seed for the sub-stream addressed by (seed, key)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])
