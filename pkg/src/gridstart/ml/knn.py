"""k-nearest-neighbour regression under Euclidean distance on standardized features."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Standardizer

WEIGHTINGS = ("uniform", "distance")


@dataclass(frozen=True)
class KnnRegressor:
    """Stores the standardized training set; prediction averages the ``k`` nearest targets.

    Distance ties are broken by the lowest training index. With ``distance``
    weighting a query that coincides with training points returns the mean of
    those points' targets.
    """

    Z: np.ndarray
    y: np.ndarray
    k: int
    weighting: str
    x_std: Standardizer

    family = "knn"

    def __post_init__(self):
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}, got {self.weighting!r}")
        if not 1 <= self.k <= self.Z.shape[0]:
            raise ValueError(f"k={self.k} outside [1, {self.Z.shape[0]}]")

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, k: int = 5, weighting: str = "uniform") -> KnnRegressor:
        X = np.asarray(X, dtype=float)
        x_std = Standardizer.fit(X)
        return cls(x_std.transform(X), np.asarray(y, dtype=float).ravel().copy(), int(k), weighting, x_std)

    def neighbours(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Indices and distances of the ``k`` nearest training points, one row per query."""
        Q = self.x_std.transform(np.atleast_2d(X))
        d2 = ((Q[:, None, :] - self.Z[None, :, :]) ** 2).sum(axis=2)
        idx = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
        return idx, np.sqrt(np.take_along_axis(d2, idx, axis=1))

    def predict(self, X: np.ndarray) -> np.ndarray:
        idx, dist = self.neighbours(X)
        yk = self.y[idx]
        if self.weighting == "uniform":
            return yk.mean(axis=1)
        exact = dist == 0.0
        out = np.empty(yk.shape[0])
        hit = exact.any(axis=1)
        if hit.any():
            out[hit] = (yk[hit] * exact[hit]).sum(axis=1) / exact[hit].sum(axis=1)
        miss = ~hit
        if miss.any():
            w = 1.0 / dist[miss]
            out[miss] = (w * yk[miss]).sum(axis=1) / w.sum(axis=1)
        return out

    def hyperparameters(self) -> dict:
        return {"k": self.k, "weighting": self.weighting}

    def to_dict(self) -> dict:
        return {"Z": self.Z.tolist(), "y": self.y.tolist(), "x_std": self.x_std.to_dict()}

    @classmethod
    def from_dict(cls, d: dict, hyper: dict) -> KnnRegressor:
        Z = np.array(d["Z"], dtype=float).reshape(len(d["y"]), -1)
        return cls(Z, np.array(d["y"], dtype=float), int(hyper["k"]), hyper["weighting"],
                   Standardizer.from_dict(d["x_std"]))
