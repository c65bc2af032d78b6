"""Seed derivation for independent trials.

Trial ``i`` of a run with master seed ``s`` uses the ``i``-th spawned child of
``numpy.random.SeedSequence(s)``, collapsed to a 64-bit integer.  The child
depends only on ``(s, i)``, so trials can run in any order or process.
"""

import numpy as np


def derive_seed(master: int, index: int) -> int:
    child = np.random.SeedSequence(int(master), spawn_key=(int(index),))
    return int(child.generate_state(1, dtype=np.uint64)[0])


def trial_rng(master: int, index: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, index))
