"""Random forest of CART trees with Gini impurity.

Split search maximises ``sum(cL^2)/nL + sum(cR^2)/nR`` over class counts of
the two children, which is the same as minimising the weighted Gini impurity
but is exact on integer counts, so equal splits compare equal. Ties go to the
lower feature index, then the lower threshold. Thresholds are midpoints
between consecutive distinct values (the lower value when the midpoint
rounds up to the upper one); ``x <= threshold`` goes left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp

from .base import Dataset, Model, check_training_set, first_argmax


@dataclass(frozen=True)
class RFParams:
    n_trees: int = 100
    features_per_split: int | None = None  # None -> ceil(sqrt(n_features))
    bootstrap: bool = True
    max_depth: int | None = None
    min_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.min_leaf < 1:
            raise ValueError("n_trees and min_leaf must be positive")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive")


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@numba.njit(cache=True)
def _splitmix(state):
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _below(state, n):
    return np.int64(_splitmix(state) % np.uint64(n))


@numba.njit(cache=True)
def _midpoint(a, b):
    # for neighbouring floats the midpoint can round up to b, which would send
    # every sample left; fall back to a in that case
    m = (a + b) / 2.0
    return a if m >= b else m


@numba.njit(cache=True)
def _build_tree(n_features, indptr, indices, data, y, w, n_classes, mtry, max_depth, min_leaf, seed):
    idx = np.nonzero(w)[0]
    m = idx.shape[0]
    cap = 2 * m + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros((cap, n_classes))

    state = np.empty(1, np.uint64)
    state[0] = seed
    lc = np.zeros(n_classes)
    counts = np.zeros(n_classes)
    zc = np.zeros(n_classes)
    xv = np.zeros(y.shape[0])
    buf = np.empty(m, np.int64)

    # node-local column view of the non-zero entries: feature f owns
    # ent_*[off[f]:off[f] + cnt[f]] whenever mark[f] == stamp
    nnz = indptr[-1]
    ent_val = np.empty(nnz)
    ent_smp = np.empty(nnz, np.int64)
    mark = np.zeros(n_features, np.int64)
    cnt = np.zeros(n_features, np.int64)
    off = np.zeros(n_features, np.int64)
    fill = np.zeros(n_features, np.int64)
    plist = np.empty(n_features, np.int64)
    stamp = 0

    stack = np.empty((cap, 4), np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = m
    stack[0, 3] = 0
    sp = 1
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = stack[sp, 0]
        start = stack[sp, 1]
        end = stack[sp, 2]
        depth = stack[sp, 3]

        counts[:] = 0.0
        for i in range(start, end):
            s = idx[i]
            counts[y[s]] += w[s]
        value[node, :] = counts
        total = counts.sum()
        n_present = 0
        for c in range(n_classes):
            if counts[c] > 0:
                n_present += 1
        if n_present <= 1 or total < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue

        stamp += 1
        n_plist = 0
        for i in range(start, end):
            s = idx[i]
            for q in range(indptr[s], indptr[s + 1]):
                f = indices[q]
                if mark[f] != stamp:
                    mark[f] = stamp
                    cnt[f] = 0
                    plist[n_plist] = f
                    n_plist += 1
                cnt[f] += 1
        pos = 0
        for t in range(n_plist):
            f = plist[t]
            off[f] = pos
            fill[f] = pos
            pos += cnt[f]
        for i in range(start, end):
            s = idx[i]
            for q in range(indptr[s], indptr[s + 1]):
                f = indices[q]
                ent_val[fill[f]] = data[q]
                ent_smp[fill[f]] = s
                fill[f] += 1

        best_score = -1.0
        best_f = -1
        best_thr = 0.0
        drawn = 0
        visited = 0
        # Features that are all-zero in the node are constant and never count
        # towards mtry, so drawing uniformly among the present ones gives the
        # same candidate order distribution as drawing among all features.
        while drawn < n_plist and visited < mtry:
            j = drawn + _below(state, n_plist - drawn)
            f = plist[j]
            plist[j] = plist[drawn]
            plist[drawn] = f
            drawn += 1

            o = off[f]
            k = cnt[f]
            ev = ent_val[o:o + k]
            es = ent_smp[o:o + k]
            srt = np.argsort(ev, kind="mergesort")
            zc[:] = counts
            zero_w = total
            nneg = 0
            for q in range(k):
                s = es[q]
                zc[y[s]] -= w[s]
                zero_w -= w[s]
                if ev[q] < 0.0:
                    nneg += 1
            has_zero = zero_w > 0
            n_items = k + (1 if has_zero else 0)
            first = ev[srt[0]] if (nneg > 0 or not has_zero) else 0.0
            last = ev[srt[k - 1]] if (nneg < k or not has_zero) else 0.0
            if first == last:
                continue
            visited += 1

            lc[:] = 0.0
            nl = 0.0
            # items in ascending value order: negatives, zero block, positives
            for it in range(n_items - 1):
                if has_zero and it == nneg:
                    for c in range(n_classes):
                        lc[c] += zc[c]
                    nl += zero_w
                    a = 0.0
                else:
                    q = it if (not has_zero or it < nneg) else it - 1
                    s = es[srt[q]]
                    lc[y[s]] += w[s]
                    nl += w[s]
                    a = ev[srt[q]]
                nxt = it + 1
                if has_zero and nxt == nneg:
                    b = 0.0
                else:
                    q = nxt if (not has_zero or nxt < nneg) else nxt - 1
                    b = ev[srt[q]]
                if a == b:
                    continue
                nr = total - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                sl = 0.0
                sr = 0.0
                for c in range(n_classes):
                    sl += lc[c] * lc[c]
                    rc = counts[c] - lc[c]
                    sr += rc * rc
                score = sl / nl + sr / nr
                if score > best_score or (score == best_score and f < best_f):
                    best_score = score
                    best_f = f
                    best_thr = _midpoint(a, b)
        if best_f < 0:
            continue

        # stable in-place partition of idx[start:end], reading best_f from the node's entries
        nn = end - start
        for i in range(start, end):
            xv[idx[i]] = 0.0
        o = off[best_f]
        for q in range(o, o + cnt[best_f]):
            xv[ent_smp[q]] = ent_val[q]
        for i in range(nn):
            buf[i] = idx[start + i]
        k = start
        for i in range(nn):
            if xv[buf[i]] <= best_thr:
                idx[k] = buf[i]
                k += 1
        mid = k
        for i in range(nn):
            if xv[buf[i]] > best_thr:
                idx[k] = buf[i]
                k += 1
        if mid == start or mid == end:
            continue

        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        # right pushed first so the left subtree is numbered and built first
        stack[sp, 0] = n_nodes + 1
        stack[sp, 1] = mid
        stack[sp, 2] = end
        stack[sp, 3] = depth + 1
        sp += 1
        stack[sp, 0] = n_nodes
        stack[sp, 1] = start
        stack[sp, 2] = mid
        stack[sp, 3] = depth + 1
        sp += 1
        n_nodes += 2

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@numba.njit(cache=True)
def _apply_tree(feature, threshold, left, right, X):
    out = np.empty(X.shape[0], np.int64)
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out


class DecisionTree:
    def __init__(self, feature, threshold, left, right, value):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value
        self.leaf_class = first_argmax(value)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict_indices(self, X_dense: np.ndarray) -> np.ndarray:
        leaves = _apply_tree(self.feature, self.threshold, self.left, self.right, X_dense)
        return self.leaf_class[leaves]

    def dump(self, classes) -> str:
        lines = []

        def walk(node, depth):
            pad = "  " * depth
            if self.feature[node] < 0:
                dist = " ".join(f"{c.value}={self.value[node, i]:g}"
                                for i, c in enumerate(classes) if self.value[node, i])
                lines.append(f"{pad}leaf {classes[self.leaf_class[node]].value} [{dist}]")
                return
            lines.append(f"{pad}x[{self.feature[node]}] <= {self.threshold[node]!r}")
            walk(self.left[node], depth + 1)
            walk(self.right[node], depth + 1)

        walk(0, 0)
        return "\n".join(lines)


class RandomForestModel(Model):
    algorithm = "RF"

    def __init__(self, classes, n_features, trees, params: RFParams):
        self.classes = tuple(classes)
        self.n_features = n_features
        self.trees = trees
        self.params = params

    def votes(self, X) -> np.ndarray:
        dense = np.ascontiguousarray(X.toarray())
        votes = np.zeros((dense.shape[0], len(self.classes)), dtype=np.int64)
        rows = np.arange(dense.shape[0])
        for tree in self.trees:
            np.add.at(votes, (rows, tree.predict_indices(dense)), 1)
        return votes

    def predict_indices(self, X) -> np.ndarray:
        return first_argmax(self.votes(X))

    def dump(self) -> str:
        parts = [f"RF {self.params!r}"]
        for i, t in enumerate(self.trees):
            parts.append(f"# tree {i} ({t.n_nodes} nodes)")
            parts.append(t.dump(self.classes))
        return "\n".join(parts) + "\n"


def _csr_parts(X):
    X = sp.csr_matrix(X, dtype=np.float64)
    X.eliminate_zeros()
    X.sort_indices()
    return X.shape[1], X.indptr.astype(np.int64), X.indices.astype(np.int64), X.data.copy()


def fit_tree(X, y, weights, n_classes, mtry, max_depth, min_leaf, seed) -> DecisionTree:
    """Grow a single tree; ``X`` may be dense or sparse."""
    arrays = _build_tree(
        *_csr_parts(X),
        np.asarray(y, dtype=np.int64),
        np.asarray(weights, dtype=np.int64),
        n_classes,
        mtry,
        -1 if max_depth is None else max_depth,
        min_leaf,
        np.uint64(seed),
    )
    return DecisionTree(*arrays)


def train_random_forest(dataset: Dataset, params: RFParams = RFParams()) -> RandomForestModel:
    check_training_set(dataset)
    n, n_features = dataset.X.shape
    mtry = params.features_per_split or max(1, math.ceil(math.sqrt(n_features)))
    mtry = min(mtry, max(n_features, 1))
    parts = _csr_parts(dataset.X)
    y = dataset.y
    seeds = np.random.SeedSequence(params.seed).generate_state(2 * params.n_trees, dtype=np.uint64)
    trees = []
    for t in range(params.n_trees):
        if params.bootstrap:
            draws = np.random.default_rng(int(seeds[2 * t])).integers(0, n, size=n)
            weights = np.bincount(draws, minlength=n).astype(np.int64)
        else:
            weights = np.ones(n, dtype=np.int64)
        arrays = _build_tree(
            *parts, y, weights, len(dataset.classes), mtry,
            -1 if params.max_depth is None else params.max_depth,
            params.min_leaf, seeds[2 * t + 1],
        )
        trees.append(DecisionTree(*arrays))
    return RandomForestModel(dataset.classes, n_features, trees, params)
