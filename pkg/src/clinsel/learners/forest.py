import math

import numpy as np

from .tree import TreeArrays, _apply_forest, _build_forest, build_tree

N_TREES = 100
FOREST_DEPTH = 8
FOREST_MIN_LEAF = 1


class DecisionTreeModel:
    family = "decision_tree"

    def __init__(self, tree: TreeArrays):
        self.tree = tree

    @classmethod
    def fit(cls, X, y, max_depth=3, min_leaf=5):
        return cls(build_tree(X, y, max_depth, min_leaf))

    def score(self, X):
        return self.tree.predict(X)


class RandomForestModel:
    """Trees are stored as concatenated node arrays; ``offsets[t]:offsets[t+1]`` is tree t."""

    family = "random_forest"

    def __init__(self, arrays, offsets):
        self.arrays = arrays
        self.offsets = offsets

    @property
    def n_trees(self):
        return self.offsets.shape[0] - 1

    @property
    def trees(self):
        return [TreeArrays(*(a[lo:hi] for a in self.arrays))
                for lo, hi in zip(self.offsets[:-1], self.offsets[1:])]

    @classmethod
    def fit(cls, X, y, rng, n_trees=N_TREES, max_depth=FOREST_DEPTH, min_leaf=FOREST_MIN_LEAF,
            max_features=None, bootstrap=True):
        X = np.ascontiguousarray(X, dtype=float)
        y = np.ascontiguousarray(y, dtype=float)
        n, p = X.shape
        mtry = min(p, max_features if max_features is not None else math.ceil(math.sqrt(p)))
        # all randomness is drawn up front: bootstrap rows, then per-node feature keys
        if bootstrap:
            samples = rng.integers(0, n, size=(n_trees, n))
        else:
            samples = np.broadcast_to(np.arange(n), (n_trees, n))
        samples = np.ascontiguousarray(samples, dtype=np.int64)
        if mtry < p:
            keys = rng.random((n_trees, 2 * n + 1, p))
        else:
            keys = np.zeros((n_trees, 1, p))
        *arrays, offsets = _build_forest(X, y, samples, int(max_depth), int(min_leaf), int(mtry), keys)
        return cls(tuple(arrays), offsets)

    def score(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        f, th, l, r, v, _ = self.arrays
        return _apply_forest(X, f, th, l, r, v, self.offsets)
