"""Shared preprocessing and the fit/predict contract of every estimator."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np


@dataclass(frozen=True)
class Standardizer:
    """Per-column affine map to zero mean and unit variance.

    Columns with zero spread keep unit scale so that they map to zero.
    """

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, A: np.ndarray) -> Standardizer:
        A = np.asarray(A, dtype=float)
        mean = A.mean(axis=0)
        scale = A.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale)

    @classmethod
    def identity(cls, width: int) -> Standardizer:
        return cls(np.zeros(width), np.ones(width))

    def transform(self, A: np.ndarray) -> np.ndarray:
        return (np.asarray(A, dtype=float) - self.mean) / self.scale

    def inverse(self, A: np.ndarray) -> np.ndarray:
        return np.asarray(A, dtype=float) * self.scale + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> Standardizer:
        return cls(np.array(d["mean"], dtype=float), np.array(d["scale"], dtype=float))


class Regressor(Protocol):
    family: str

    def predict(self, X: np.ndarray) -> np.ndarray:
        """(n, d) features to (n, t) targets."""

    def hyperparameters(self) -> dict:
        ...

    def to_dict(self) -> dict:
        ...


def as_matrix(X, width: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != width:
        raise ValueError(f"expected rows of {width} features, got shape {X.shape}")
    return X
