"""
seeding.py - Deterministic random streams derived from a single master seed

Every random consumer in the workbench asks for a generator keyed by
(seed, stream id, *indices). numpy's SeedSequence spawn keys make the
streams independent of each other and of the order in which they are built,
so per-user or per-cell work can be run in any order or in parallel.
"""
import numpy as np

from logic.errors import DomainError

STREAM_SCENARIO = 1
STREAM_NOISE = 2
STREAM_SHUFFLE = 3
STREAM_INIT = 4
STREAM_DROPOUT = 5
STREAM_BATCHES = 6
STREAM_SWEEP = 7


def derive_seed_sequence(seed, stream, *indices):
    if int(seed) < 0:
        raise DomainError(f"Seeds must be non-negative integers, got {seed}")
    key = (int(stream),) + tuple(int(i) for i in indices)
    return np.random.SeedSequence(int(seed), spawn_key=key)


def derive_rng(seed, stream, *indices):
    """Generator for stream `stream` of master seed `seed` (optionally per index)"""
    return np.random.default_rng(derive_seed_sequence(seed, stream, *indices))
