"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, *keys)``, so replication
``r`` of an experiment gets the same numbers regardless of which worker runs
it or in which order. The key count is mixed into the entropy because
SeedSequence pads with zeros, so ``(seed, 0)`` and ``(seed, 0, 0)`` would
otherwise collide.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *keys: int) -> np.random.Generator:
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError("seed and stream keys must be nonnegative integers")
    ss = np.random.SeedSequence([int(seed), len(keys), *map(int, keys)])
    return np.random.Generator(np.random.Philox(ss))


# first stream key of each experiment family
REPLICATION = 0
SCORE = 1
HESSIAN = 2
CONSISTENCY = 3
GRID_CHECK = 4
