"""Named, reproducible random streams.

Every random purpose (TASEP updates, cross-model edges, bond edges, LPP
weights, ...) gets its own PCG64 stream derived from a master seed, a
purpose label and a replica index.  Streams are independent of thread
count and of each other, so Monte Carlo replicas can run in any order or
in parallel and still reproduce bit for bit.
"""

from __future__ import annotations

import zlib

import numpy as np

# Purpose labels used across the package.  Free-form strings work too;
# these constants just keep call sites consistent.
TASEP_UPDATES = "tasep-updates"
CROSS_EDGES = "cross-edges"
BOND_EDGES = "bond-edges"
LPP_WEIGHTS = "lpp-weights"


def stream(master_seed: int, purpose: str, replica: int = 0) -> np.random.Generator:
    """Generator for one (purpose, replica) pair under a master seed."""
    key = zlib.crc32(purpose.encode("utf-8"))
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(key, int(replica)))
    return np.random.default_rng(ss)
