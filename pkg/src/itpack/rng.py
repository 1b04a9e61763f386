"""Seeded random substreams.

Every random decision in the package is drawn from a generator keyed by a
root seed plus a tuple of integers naming *what* the draw is for (purpose,
round, iteration, attempt, transversal index, ...).  Results therefore do not
depend on the order in which work is scheduled or on the number of workers.
"""

from __future__ import annotations

import numpy as np

#: Recorded in every output file so that runs can be reproduced elsewhere.
PRNG_NAME = "numpy-PCG64/SeedSequence-spawnkey/v1"

# purpose tags (first element of every spawn key)
GEN = 1
NIBBLE = 2
COMPLETE = 3
SPLIT = 4
HALVE = 5
PRUNE = 6
LLL = 7
MONITOR = 8
LEAF = 9

_MASK64 = (1 << 64) - 1


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, key)``."""
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=tuple(int(x) for x in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit child seed, for handing to code that takes a plain seed."""
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=tuple(int(x) for x in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
