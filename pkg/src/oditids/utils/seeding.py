"""Splittable seeding.

Every random stream in the package is derived from a root seed plus a
spawn key naming its purpose, e.g. ``(STREAM_DEVICE, node, device)``. Two
streams with different keys are statistically independent, and a stream
never depends on which other streams were drawn before it.
"""

from __future__ import annotations

import numpy as np

STREAM_SPLIT = 1
STREAM_DEVICE = 2
STREAM_ATTACK_SELECTION = 3
STREAM_TRIAL = 4
STREAM_CALIBRATION = 5
STREAM_BENCH = 6


def seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))


def rng_for(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *key))


def derive_seed(seed: int, *key: int) -> int:
    return int(seed_sequence(seed, *key).generate_state(1, dtype=np.uint64)[0])
