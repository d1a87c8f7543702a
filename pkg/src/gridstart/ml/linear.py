"""Ordinary least squares on standardized features."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Standardizer

# relative eigenvalue floor below which the normal equations are treated as singular
RANK_TOL = 1e-12


@dataclass(frozen=True)
class LinearRegressor:
    """Single-target linear model ``y = w . z + b`` with ``z`` the standardized features."""

    weights: np.ndarray
    intercept: float
    x_std: Standardizer
    rank_deficient: bool = False

    family = "lr"

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray) -> LinearRegressor:
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        n, d = X.shape
        if n <= d:
            raise ValueError(f"linear regression needs more samples than features ({n} <= {d})")
        x_std = Standardizer.fit(X)
        Z = x_std.transform(X)
        intercept = float(y.mean())
        r = y - intercept
        G = Z.T @ Z
        rhs = Z.T @ r
        eig = np.linalg.eigvalsh(G)
        deficient = bool(eig[0] <= RANK_TOL * max(eig[-1], 1.0))
        if deficient:
            w = np.linalg.pinv(G) @ rhs
        else:
            w = np.linalg.solve(G, rhs)
        return cls(w, intercept, x_std, deficient)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.x_std.transform(X) @ self.weights + self.intercept

    def hyperparameters(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "x_std": self.x_std.to_dict(),
            "rank_deficient": self.rank_deficient,
        }

    @classmethod
    def from_dict(cls, d: dict, hyper: dict) -> LinearRegressor:
        return cls(np.array(d["weights"], dtype=float), float(d["intercept"]),
                   Standardizer.from_dict(d["x_std"]), bool(d["rank_deficient"]))
