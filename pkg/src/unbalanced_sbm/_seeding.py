"""Seed-stream plumbing.

One master seed feeds every sampler. Each consumer draws from a child stream
at a fixed spawn-key offset, so changing one part of an experiment (say, the
reveal probability) leaves the other random streams untouched.
"""
from __future__ import annotations

import numpy as np

LABELS = 0
EDGES = 1
REVEAL = 2
TREE = 3
CENTERS = 4
POOL = 5
REPLICA = 6


def child_rng(seed: int | None, stream: int, *extra: int) -> np.random.Generator:
    entropy = None if seed is None else int(seed)
    ss = np.random.SeedSequence(entropy, spawn_key=(stream, *map(int, extra)))
    return np.random.default_rng(ss)


def child_seed(seed: int | None, stream: int, *extra: int) -> int:
    """Integer seed for a nested sampler call, derived deterministically."""
    return int(child_rng(seed, stream, *extra).integers(0, 2**63 - 1))
