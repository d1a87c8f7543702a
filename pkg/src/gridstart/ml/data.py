"""Feature/target container and its CSV form."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    feature_names: tuple[str, ...]
    target_names: tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim == 1:
            X = X[:, None]
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "target_names", tuple(self.target_names))
        if X.shape[0] < 1:
            raise ValueError("dataset needs at least one row")
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
        if X.shape[1] != len(self.feature_names) or Y.shape[1] != len(self.target_names):
            raise ValueError("name labels do not match matrix widths")
        names = self.feature_names + self.target_names
        if len(set(names)) != len(names):
            raise ValueError("feature and target names must be unique")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("dataset contains non-finite entries")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def subset(self, idx: Sequence[int] | np.ndarray) -> Dataset:
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.Y[idx], self.feature_names, self.target_names)

    def target(self, name: str) -> np.ndarray:
        return self.Y[:, self.target_names.index(name)]

    def select_targets(self, names: Sequence[str]) -> Dataset:
        cols = [self.target_names.index(n) for n in names]
        return Dataset(self.X, self.Y[:, cols], self.feature_names, tuple(names))


def dumps_dataset(data: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(data.feature_names + data.target_names)
    for x, y in zip(data.X, data.Y):
        w.writerow(["%.17g" % v for v in np.concatenate([x, y])])
    return buf.getvalue()


def save_dataset(data: Dataset, path: str | Path) -> None:
    Path(path).write_text(dumps_dataset(data), encoding="utf-8")


def load_dataset(path: str | Path, n_features: int = 2) -> Dataset:
    """Read a dataset CSV; the first ``n_features`` columns are features."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    try:
        M = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(-1, len(header))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return Dataset(M[:, :n_features], M[:, n_features:], header[:n_features], header[n_features:])
