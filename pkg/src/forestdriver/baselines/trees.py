"""CART decision trees (Gini impurity) and bagged random forests."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .. import kernels
from ..rng import make_rng

LEAF = -1


def _n_features(max_features, d):
    if max_features is None or max_features == "all":
        return d
    if max_features == "sqrt":
        return max(1, int(math.sqrt(d)))
    return max(1, min(d, int(max_features)))


class DecisionTree:
    """Greedy CART classifier.

    A node is split whenever it is impure, below ``max_depth`` and some split
    leaves at least ``min_samples_leaf`` rows on each side, even if the best
    split has zero Gini gain. Samples go left when ``x[feature] <= threshold``.
    """

    def __init__(self, max_depth=None, min_samples_leaf=1, max_features=None,
                 n_classes=4, seed=0):
        self.max_depth = max_depth
        self.min_samples_leaf = int(min_samples_leaf)
        self.max_features = max_features
        self.n_classes = n_classes
        self.seed = seed
        self.feature = self.threshold = self.left = self.right = self.counts = None

    def fit(self, X, y, rng=None):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if rng is None:
            rng = make_rng(self.seed, "tree")
        d = X.shape[1]
        k = _n_features(self.max_features, d)
        feature, threshold, left, right, counts = [], [], [], [], []

        def new_node(idx):
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            counts.append(np.bincount(y[idx], minlength=self.n_classes))
            return len(feature) - 1

        root = new_node(np.arange(len(y)))
        stack = [(root, np.arange(len(y)), 0)]
        while stack:
            node, idx, depth = stack.pop()
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            if np.count_nonzero(counts[node]) <= 1:
                continue
            if k < d:
                feats = np.sort(rng.choice(d, size=k, replace=False))
            else:
                feats = np.arange(d)
            f, t, _ = kernels.gini_best_split(X[idx], y[idx], feats, self.n_classes,
                                              self.min_samples_leaf)
            if f < 0:
                continue
            go_left = X[idx, f] <= t
            li, ri = idx[go_left], idx[~go_left]
            feature[node] = f
            threshold[node] = t
            left[node] = new_node(li)
            right[node] = new_node(ri)
            # right pushed first so the left subtree is expanded first
            stack.append((right[node], ri, depth + 1))
            stack.append((left[node], li, depth + 1))
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64)
        return self

    @property
    def node_count(self):
        return len(self.feature)

    def apply(self, X):
        """Leaf index reached by each row."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.nonzero(active)[0]
            n = node[rows]
            go_left = X[rows, self.feature[n]] <= self.threshold[n]
            node[rows] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] != LEAF
        return node

    def predict(self, X):
        return np.argmax(self.counts[self.apply(X)], axis=1)

    def to_arrays(self, prefix=""):
        return {f"{prefix}feature": self.feature, f"{prefix}threshold": self.threshold,
                f"{prefix}left": self.left, f"{prefix}right": self.right,
                f"{prefix}counts": self.counts}

    @classmethod
    def from_arrays(cls, arrays, prefix="", **params):
        tree = cls(**params)
        tree.feature = arrays[f"{prefix}feature"]
        tree.threshold = arrays[f"{prefix}threshold"]
        tree.left = arrays[f"{prefix}left"]
        tree.right = arrays[f"{prefix}right"]
        tree.counts = arrays[f"{prefix}counts"]
        return tree


class RandomForest:
    """Bagged CART trees with per-split feature subsampling and majority vote.

    Tree ``i`` draws its bootstrap sample and feature subsets from a generator
    seeded by ``(seed, i)``, so ``n_jobs`` does not change the result.
    """

    def __init__(self, n_trees=100, max_depth=None, min_samples_leaf=1,
                 max_features="sqrt", bootstrap=True, n_classes=4, seed=0, n_jobs=1):
        self.n_trees = int(n_trees)
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.n_classes = n_classes
        self.seed = seed
        self.n_jobs = n_jobs
        self.trees = []

    def _fit_tree(self, i, X, y):
        rng = make_rng(self.seed, "tree", i)
        if self.bootstrap:
            idx = rng.integers(0, len(y), size=len(y))
            Xs, ys = X[idx], y[idx]
        else:
            Xs, ys = X, y
        tree = DecisionTree(self.max_depth, self.min_samples_leaf, self.max_features,
                            self.n_classes, seed=self.seed)
        return tree.fit(Xs, ys, rng=rng)

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if self.n_jobs and self.n_jobs > 1:
            with ThreadPoolExecutor(self.n_jobs) as pool:
                self.trees = list(pool.map(lambda i: self._fit_tree(i, X, y), range(self.n_trees)))
        else:
            self.trees = [self._fit_tree(i, X, y) for i in range(self.n_trees)]
        return self

    def votes(self, X):
        X = np.asarray(X, dtype=np.float64)
        v = np.zeros((len(X), self.n_classes), dtype=np.int64)
        rows = np.arange(len(X))
        for t in self.trees:
            np.add.at(v, (rows, t.predict(X)), 1)
        return v

    def predict(self, X):
        return np.argmax(self.votes(X), axis=1)

    def to_arrays(self):
        out = {}
        for i, t in enumerate(self.trees):
            out.update(t.to_arrays(prefix=f"tree{i}."))
        return out

    @classmethod
    def from_arrays(cls, arrays, n_trees, **params):
        forest = cls(n_trees=n_trees, **params)
        forest.trees = [DecisionTree.from_arrays(arrays, prefix=f"tree{i}.",
                                                 n_classes=forest.n_classes)
                        for i in range(n_trees)]
        return forest
