"""Seed handling.

Every randomized routine takes an explicit seed.  Trial ``i`` of an
experiment with master seed ``s`` always draws from the stream spawned at
``(s, i)``, so serial and parallel runs see identical random numbers.
"""
from __future__ import annotations

import os

import numpy as np

SEED_ENV = "MCIDENT_SEED"
DEFAULT_SEED = 0


def resolve_seed(seed: int | None = None) -> int:
    """Return ``seed``, falling back to ``$MCIDENT_SEED`` and then to 0."""
    if seed is not None:
        return int(seed)
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        return int(env)
    return DEFAULT_SEED


def make_rng(seed=None) -> np.random.Generator:
    """Build a generator from an int, a (seed, index, ...) tuple, a SeedSequence or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    if isinstance(seed, (tuple, list)):
        master, *key = seed
        return np.random.default_rng(
            np.random.SeedSequence(int(master) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
        )
    return np.random.default_rng(np.random.SeedSequence(resolve_seed(seed) & (2**64 - 1)))


def trial_rng(master_seed: int, index: int, *subkeys: int) -> np.random.Generator:
    """Generator for trial ``index`` of an experiment run under ``master_seed``."""
    return make_rng((master_seed, index, *subkeys))


def derive_seed(master_seed: int, *key: int) -> int:
    """A 63-bit integer seed derived deterministically from ``(master_seed, *key)``."""
    ss = np.random.SeedSequence(int(master_seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
