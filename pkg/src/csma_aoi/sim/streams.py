"""Reproducible random streams.

Every replication draws from its own Philox (counter-based) generator keyed
by ``(seed, replication, *tags)``, so results do not depend on the order in
which replications are executed.
"""
from __future__ import annotations

import numpy as np


def stream(seed: int, replication: int = 0, *tags: int) -> np.random.Generator:
    key = [int(seed), int(replication), *(int(t) for t in tags)]
    if any(k < 0 for k in key):
        raise ValueError("seed, replication and tags must be nonnegative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))
