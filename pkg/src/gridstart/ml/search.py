"""Exhaustive grid search with seeded k-fold cross-validation, scored by R²."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import Dataset
from .metrics import r2_score
from .models import FAMILIES, RegressorModel, estimator, fit_model

DEFAULT_GRIDS: dict[str, dict[str, list]] = {
    "lr": {},
    "knn": {"k": list(range(1, 16)), "weighting": ["uniform", "distance"]},
    "dtr": {"max_depth": [2, 4, 6, 8, 12, None]},
    "svm": {"C": [1.0, 10.0, 100.0], "gamma": [0.1, 1.0, 10.0], "epsilon": [0.001, 0.01]},
    "nn": {"hidden": [8, 32], "learning_rate": [0.01, 0.001]},
}


@dataclass(frozen=True)
class GridSearchSpec:
    family: str
    grid: Mapping[str, Sequence] = field(default_factory=dict)
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        estimator(self.family)
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        for name, values in self.grid.items():
            if len(values) == 0:
                raise ValueError(f"grid for {name!r} is empty")

    @classmethod
    def default(cls, family: str, folds: int = 5, seed: int = 0) -> GridSearchSpec:
        return cls(family, DEFAULT_GRIDS[family], folds, seed)

    def combinations(self) -> list[dict]:
        names = list(self.grid)
        return [dict(zip(names, vals)) for vals in itertools.product(*(self.grid[n] for n in names))]


@dataclass(frozen=True)
class CvScore:
    params: dict
    mean: float
    fold_scores: tuple[float, ...]
    error: str | None = None


@dataclass(frozen=True)
class GridSearchResult:
    best_params: dict
    best_score: float
    scores: tuple[CvScore, ...]


def kfold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffled partition of ``range(n)`` into ``folds`` nearly equal parts."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if folds > n:
        raise ValueError(f"folds exceed samples ({folds} > {n})")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def cross_validate(family: str, data: Dataset, params: dict, parts: list[np.ndarray]) -> CvScore:
    """Mean validation R² over folds; one target per call. A failing fold scores -inf."""
    scores = []
    for hold in parts:
        train = np.setdiff1d(np.arange(data.n), hold, assume_unique=True)
        try:
            model = fit_model(family, data.subset(train), params)
            pred = model.predict(data.X[hold])[:, 0]
            scores.append(r2_score(data.Y[hold, 0], pred))
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            return CvScore(params, -np.inf, tuple(scores), f"{type(exc).__name__}: {exc}")
    return CvScore(params, float(np.mean(scores)), tuple(scores))


def grid_search(spec: GridSearchSpec, data: Dataset) -> GridSearchResult:
    """Evaluate every combination; the first best in grid order wins.

    Only the first target column of ``data`` is scored, so callers tune each
    target separately.
    """
    parts = kfold_indices(data.n, spec.folds, spec.seed)
    single = data.select_targets(data.target_names[:1])
    scores = tuple(cross_validate(spec.family, single, p, parts) for p in spec.combinations())
    best = scores[0]
    for s in scores[1:]:
        if s.mean > best.mean:
            best = s
    return GridSearchResult(dict(best.params), best.mean, scores)


def tune_and_fit(family: str, data: Dataset, grid: Mapping[str, Sequence] | None = None, folds: int = 5,
                 seed: int = 0) -> tuple[RegressorModel, dict[str, GridSearchResult]]:
    """Grid-search each target independently and refit its best combination on all of ``data``."""
    if family not in FAMILIES:
        estimator(family)
    spec = GridSearchSpec(family, DEFAULT_GRIDS[family] if grid is None else grid, folds, seed)
    results = {}
    for name in data.target_names:
        results[name] = grid_search(spec, data.select_targets([name]))
    model = fit_model(family, data, [results[n].best_params for n in data.target_names])
    return model, results
