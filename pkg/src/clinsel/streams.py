"""Named RNG substreams.

Every random task (one imputation, one CV run, one candidate fit) gets its own
generator keyed by the root seed plus a tuple of integers, so results do not
depend on execution order or worker count.
"""

import numpy as np

# stream tags; keep stable, they are part of the reproducibility contract
IMPUTE = 1
FOLDS = 2
FIT = 3
GENERATE = 4
TREES = 5

OUTCOME_CODES = {"response": 0, "remission": 1}


def substream(seed, *key):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)
