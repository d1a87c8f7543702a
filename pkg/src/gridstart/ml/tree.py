"""CART regression tree with squared-error splits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF = -1


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best (feature, threshold, gain) over all features and midpoints, or None.

    ``gain`` is the drop in total squared error. The first best split in
    (feature, threshold) order wins ties.
    """
    n = y.size
    total = y.sum()
    parent = total * total / n
    best = None
    best_score = parent
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        cs = np.cumsum(y[order])
        nl = np.arange(1, n)
        valid = xs[1:] > xs[:-1]
        valid &= (nl >= min_leaf) & (n - nl >= min_leaf)
        if not valid.any():
            continue
        sl = cs[:-1]
        score = sl * sl / nl + (total - sl) ** 2 / (n - nl)
        score = np.where(valid, score, -np.inf)
        i = int(np.argmax(score))
        if score[i] > best_score:
            best_score = score[i]
            best = (j, 0.5 * (xs[i] + xs[i + 1]))
    if best is None:
        return None
    gain = best_score - parent
    # a gain at rounding level is not an improvement
    if gain <= 1e-12 * max(float(np.dot(y, y)), 1e-300):
        return None
    return best[0], best[1], gain


@dataclass(frozen=True)
class TreeRegressor:
    """Array-encoded binary tree. Node ``i`` is a leaf when ``feature[i] == -1``.

    Samples with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    max_depth: int | None
    min_samples_leaf: int

    family = "dtr"

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, max_depth: int | None = None,
            min_samples_leaf: int = 1) -> TreeRegressor:
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if max_depth is not None and max_depth < 0:
            raise ValueError("max_depth must be >= 0 or None")
        if y.size < 2 * min_samples_leaf:
            raise ValueError(f"{y.size} samples cannot fill two leaves of {min_samples_leaf}")
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node(rows):
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            value.append(float(y[rows].mean()))
            return len(feature) - 1

        root = new_node(np.arange(y.size))
        stack = [(root, np.arange(y.size), 0)]
        while stack:
            node, rows, depth = stack.pop()
            if (max_depth is not None and depth >= max_depth) or rows.size < 2 * min_samples_leaf:
                continue
            split = _best_split(X[rows], y[rows], min_samples_leaf)
            if split is None:
                continue
            j, thr, _ = split
            go_left = X[rows, j] <= thr
            lrows, rrows = rows[go_left], rows[~go_left]
            feature[node], threshold[node] = j, thr
            left[node] = new_node(lrows)
            right[node] = new_node(rrows)
            stack.append((right[node], rrows, depth + 1))
            stack.append((left[node], lrows, depth + 1))
        return cls(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                   np.array(right, dtype=np.int64), np.array(value), max_depth, int(min_samples_leaf))

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            i, d = stack.pop()
            if self.feature[i] == LEAF:
                best = max(best, d)
            else:
                stack += [(self.left[i], d + 1), (self.right[i], d + 1)]
        return best

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            a = node[active]
            go_left = X[active, self.feature[a]] <= self.threshold[a]
            node[active] = np.where(go_left, self.left[a], self.right[a])
            active = self.feature[node] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def hyperparameters(self) -> dict:
        return {"max_depth": self.max_depth, "min_samples_leaf": self.min_samples_leaf}

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, hyper: dict) -> TreeRegressor:
        md = hyper["max_depth"]
        return cls(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=float),
                   np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                   np.array(d["value"], dtype=float), None if md is None else int(md),
                   int(hyper["min_samples_leaf"]))
