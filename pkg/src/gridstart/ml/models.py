"""Multi-target models: one independent estimator per target column."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .base import as_matrix
from .data import Dataset
from .knn import KnnRegressor
from .linear import LinearRegressor
from .mlp import MlpRegressor
from .svr import SvrRegressor
from .tree import TreeRegressor

FORMAT_TAG = "gridstart-model"
FORMAT_VERSION = 1

ESTIMATORS = {
    "lr": LinearRegressor,
    "svm": SvrRegressor,
    "knn": KnnRegressor,
    "dtr": TreeRegressor,
    "nn": MlpRegressor,
}
FAMILIES = tuple(ESTIMATORS)


class ModelFormatError(ValueError):
    pass


def estimator(family: str):
    try:
        return ESTIMATORS[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}") from None


@dataclass(frozen=True)
class RegressorModel:
    """Fitted predictor from load features to setpoint targets.

    ``members[k]`` predicts ``target_names[k]`` and may carry its own
    hyperparameters. ``meta`` holds free-form string tags such as the grid
    variant the model was trained on.
    """

    family: str
    feature_names: tuple[str, ...]
    target_names: tuple[str, ...]
    members: tuple
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.members) != len(self.target_names):
            raise ValueError("one member per target required")

    def predict(self, X) -> np.ndarray:
        X = as_matrix(X, len(self.feature_names))
        return np.column_stack([m.predict(X) for m in self.members])

    def predict_one(self, x) -> dict[str, float]:
        return dict(zip(self.target_names, self.predict(x)[0].tolist()))

    def hyperparameters(self) -> dict[str, dict]:
        return {name: m.hyperparameters() for name, m in zip(self.target_names, self.members)}


def fit_model(family: str, data: Dataset, params: dict | Sequence[dict] | None = None) -> RegressorModel:
    """Fit one estimator per target.

    ``params`` is either one hyperparameter dict shared by all targets or a
    sequence with one dict per target.
    """
    cls = estimator(family)
    if params is None or isinstance(params, dict):
        per_target = [dict(params or {})] * len(data.target_names)
    else:
        per_target = [dict(p) for p in params]
        if len(per_target) != len(data.target_names):
            raise ValueError("need one hyperparameter dict per target")
    members = tuple(cls.fit(data.X, data.Y[:, k], **per_target[k]) for k in range(data.Y.shape[1]))
    return RegressorModel(family, data.feature_names, data.target_names, members)


def with_meta(model: RegressorModel, **tags: str) -> RegressorModel:
    return replace(model, meta={**model.meta, **{k: str(v) for k, v in tags.items()}})


def fit_linear(data: Dataset) -> RegressorModel:
    return fit_model("lr", data)


def fit_knn(data: Dataset, k: int = 5, weighting: str = "uniform") -> RegressorModel:
    return fit_model("knn", data, {"k": k, "weighting": weighting})


def fit_tree(data: Dataset, max_depth: int | None = None, min_samples_leaf: int = 1) -> RegressorModel:
    return fit_model("dtr", data, {"max_depth": max_depth, "min_samples_leaf": min_samples_leaf})


def fit_svr(data: Dataset, C: float = 10.0, epsilon: float = 0.01, gamma: float = 1.0) -> RegressorModel:
    return fit_model("svm", data, {"C": C, "epsilon": epsilon, "gamma": gamma})


def fit_mlp(data: Dataset, hidden: int = 8, learning_rate: float = 0.01, epochs: int = 2000,
            seed: int = 0) -> RegressorModel:
    return fit_model("nn", data, {"hidden": hidden, "learning_rate": learning_rate, "epochs": epochs, "seed": seed})


def model_to_dict(model: RegressorModel) -> dict:
    return {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "family": model.family,
        "features": list(model.feature_names),
        "targets": list(model.target_names),
        "members": [{"hyperparameters": m.hyperparameters(), "params": m.to_dict()} for m in model.members],
        "meta": {str(k): str(v) for k, v in model.meta.items()},
    }


def model_from_dict(d: dict) -> RegressorModel:
    if d.get("format") != FORMAT_TAG:
        raise ModelFormatError("not a gridstart model file")
    if d.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model version {d.get('version')!r}")
    try:
        cls = estimator(d["family"])
        members = tuple(cls.from_dict(m["params"], m["hyperparameters"]) for m in d["members"])
        return RegressorModel(d["family"], tuple(d["features"]), tuple(d["targets"]), members,
                              dict(d.get("meta", {})))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from exc


def dumps_model(model: RegressorModel) -> str:
    # json writes floats with repr, so parameters round-trip bit-exactly
    return json.dumps(model_to_dict(model), indent=1, sort_keys=True, allow_nan=False) + "\n"


def loads_model(text: str) -> RegressorModel:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"line {exc.lineno}: {exc.msg}") from exc
    return model_from_dict(d)


def save_model(model: RegressorModel, path: str | Path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def load_model(path: str | Path) -> RegressorModel:
    return loads_model(Path(path).read_text(encoding="utf-8"))
