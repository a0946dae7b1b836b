"""CART with Gini impurity.

The builder runs in numba. Nodes are stored in flat arrays in creation order;
``feature == -1`` marks a leaf. Per-node feature subsampling is driven by a
``keys`` matrix of uniforms indexed by node id, so a caller that supplies the
same keys gets the same tree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

# improvement (in count-weighted Gini units) a split must beat to count as better
GAIN_TOL = 1e-9


@numba.njit(cache=True)
def _weighted_gini(pos, n):
    # n * gini for a binary node
    if n == 0:
        return 0.0
    return 2.0 * pos * (n - pos) / n


@numba.njit(cache=True)
def _sample_features(key_row, p, mtry, out, taken):
    """The mtry features with the smallest keys, written to out[:mtry] in ascending index order."""
    taken[:] = False
    for r in range(mtry):
        best = -1
        for f in range(p):
            if not taken[f] and (best < 0 or key_row[f] < key_row[best]):
                best = f
        taken[best] = True
    r = 0
    for f in range(p):
        if taken[f]:
            out[r] = f
            r += 1


@numba.njit(cache=True)
def _build(X, y, sample, max_depth, min_leaf, mtry, keys):
    n_total = sample.shape[0]
    p = X.shape[1]
    cap = 2 * n_total + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    n_node = np.zeros(cap, dtype=np.int64)

    # gathered copies indexed by sample position, plus per-feature presorted positions
    xv = np.empty((p, n_total))
    yv = np.empty(n_total)
    for i in range(n_total):
        yv[i] = y[sample[i]]
        for f in range(p):
            xv[f, i] = X[sample[i], f]
    srt = np.empty((p, n_total), dtype=np.int64)
    for f in range(p):
        srt[f] = np.argsort(xv[f], kind="mergesort")
    goes_left = np.zeros(n_total, dtype=np.bool_)
    tmp = np.empty(n_total, dtype=np.int64)
    feats = np.arange(p)
    taken = np.zeros(p, dtype=np.bool_)

    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n_total
    st_depth[0] = 0
    top = 1
    count = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        n = end - start
        pos = 0.0
        for i in range(start, end):
            pos += yv[srt[0, i]]
        n_node[node] = n
        value[node] = pos / n if n > 0 else 0.0
        if depth >= max_depth or n < 2 * min_leaf or pos == 0.0 or pos == n:
            continue

        n_feats = p
        if mtry < p:
            _sample_features(keys[node], p, mtry, feats, taken)
            n_feats = mtry

        parent = _weighted_gini(pos, n)
        best_cost = np.inf
        best_f = -1
        best_t = 0.0
        for fi in range(n_feats):
            f = feats[fi]
            cum = 0.0
            for i in range(start, end - 1):
                a = srt[f, i]
                b = srt[f, i + 1]
                cum += yv[a]
                nl = i - start + 1
                v0 = xv[f, a]
                v1 = xv[f, b]
                if v0 == v1:
                    continue
                if nl < min_leaf or n - nl < min_leaf:
                    continue
                cost = _weighted_gini(cum, nl) + _weighted_gini(pos - cum, n - nl)
                if cost < best_cost - GAIN_TOL:
                    best_cost = cost
                    best_f = f
                    best_t = 0.5 * (v0 + v1)
        if best_f < 0 or parent - best_cost <= GAIN_TOL:
            continue

        n_left = 0
        for i in range(start, end):
            a = srt[0, i]
            goes_left[a] = xv[best_f, a] <= best_t
            if goes_left[a]:
                n_left += 1
        mid = start + n_left
        for f in range(p):
            lo = start
            hi = 0
            for i in range(start, end):
                a = srt[f, i]
                if goes_left[a]:
                    srt[f, lo] = a
                    lo += 1
                else:
                    tmp[hi] = a
                    hi += 1
            for i in range(hi):
                srt[f, mid + i] = tmp[i]

        feature[node] = best_f
        threshold[node] = best_t
        left[node] = count
        right[node] = count + 1
        # push right first so the left subtree is expanded first
        st_node[top] = count + 1
        st_start[top] = mid
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = count
        st_start[top] = start
        st_end[top] = mid
        st_depth[top] = depth + 1
        top += 1
        count += 2

    return feature[:count], threshold[:count], left[:count], right[:count], value[:count], n_node[:count]


@numba.njit(cache=True)
def _apply(X, feature, threshold, left, right, value):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@numba.njit(cache=True)
def _build_forest(X, y, samples, max_depth, min_leaf, mtry, keys):
    """Grow one tree per row of ``samples``; node arrays are concatenated, ``offsets`` delimit trees.

    Child indices stay local to their tree.
    """
    n_trees = samples.shape[0]
    cap = n_trees * (2 * samples.shape[1] + 1)
    feature = np.empty(cap, dtype=np.int64)
    threshold = np.empty(cap)
    left = np.empty(cap, dtype=np.int64)
    right = np.empty(cap, dtype=np.int64)
    value = np.empty(cap)
    n_node = np.empty(cap, dtype=np.int64)
    offsets = np.zeros(n_trees + 1, dtype=np.int64)
    at = 0
    for t in range(n_trees):
        f, th, l, r, v, nn = _build(X, y, samples[t], max_depth, min_leaf, mtry, keys[t])
        m = f.shape[0]
        feature[at:at + m] = f
        threshold[at:at + m] = th
        left[at:at + m] = l
        right[at:at + m] = r
        value[at:at + m] = v
        n_node[at:at + m] = nn
        at += m
        offsets[t + 1] = at
    return (feature[:at].copy(), threshold[:at].copy(), left[:at].copy(), right[:at].copy(),
            value[:at].copy(), n_node[:at].copy(), offsets)


@numba.njit(cache=True)
def _apply_forest(X, feature, threshold, left, right, value, offsets):
    """Mean leaf value over all trees."""
    n_trees = offsets.shape[0] - 1
    out = np.zeros(X.shape[0])
    for t in range(n_trees):
        base = offsets[t]
        for i in range(X.shape[0]):
            node = 0
            while feature[base + node] >= 0:
                if X[i, feature[base + node]] <= threshold[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            out[i] += value[base + node]
    return out / n_trees


@dataclass(frozen=True, eq=False)
class TreeArrays:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_train: np.ndarray

    @property
    def node_count(self):
        return self.feature.shape[0]

    def is_leaf(self, node):
        return self.feature[node] < 0

    def predict(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        return _apply(X, self.feature, self.threshold, self.left, self.right, self.value)

    def depth(self, node=0):
        if self.is_leaf(node):
            return 0
        return 1 + max(self.depth(self.left[node]), self.depth(self.right[node]))

    def leaves(self):
        return [i for i in range(self.node_count) if self.is_leaf(i)]

    def training_gini(self):
        """Count-weighted Gini summed over leaves, divided by the root count."""
        total = 0.0
        for i in self.leaves():
            n = self.n_train[i]
            pos = self.value[i] * n
            total += 2.0 * pos * (n - pos) / n if n else 0.0
        return total / self.n_train[0]

    def splits(self, node=0):
        """(feature, threshold) pairs in root-to-leaf depth-first (pre-order) order."""
        if self.is_leaf(node):
            return []
        return (
            [(int(self.feature[node]), float(self.threshold[node]))]
            + self.splits(self.left[node])
            + self.splits(self.right[node])
        )

    def to_dict(self, names=None, node=0):
        if self.is_leaf(node):
            return {
                "type": "leaf",
                "positive_fraction": float(self.value[node]),
                "n_train": int(self.n_train[node]),
            }
        f = int(self.feature[node])
        return {
            "type": "split",
            "feature": names[f] if names is not None else f,
            "threshold": float(self.threshold[node]),
            "n_train": int(self.n_train[node]),
            "left": self.to_dict(names, self.left[node]),
            "right": self.to_dict(names, self.right[node]),
        }


def build_tree(X, y, max_depth, min_leaf, sample=None, mtry=None, keys=None) -> TreeArrays:
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    n, p = X.shape
    if sample is None:
        sample = np.arange(n, dtype=np.int64)
    sample = np.ascontiguousarray(sample, dtype=np.int64)
    if mtry is None or mtry >= p:
        mtry = p
        keys = np.zeros((1, max(p, 1)))
    elif keys is None:
        raise ValueError("feature subsampling needs a keys matrix")
    else:
        keys = np.ascontiguousarray(keys, dtype=float)
        if keys.shape[0] < 2 * sample.shape[0] + 1 or keys.shape[1] < p:
            raise ValueError(f"keys must be at least ({2 * sample.shape[0] + 1}, {p})")
    return TreeArrays(*_build(X, y, sample, int(max_depth), int(min_leaf), int(mtry), keys))
