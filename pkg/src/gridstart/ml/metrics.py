"""Regression scores."""
from __future__ import annotations

import numpy as np


def r2_score(y_true, y_pred) -> float:
    """Coefficient of determination reported as a percentage, ``100 (1 - SS_res / SS_tot)``.

    Raises
    ------
    ValueError
        If fewer than two samples are given, the shapes differ, or ``y_true``
        is constant (the score is undefined).
    """
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.shape != y_pred.shape:
        raise ValueError(f"shape mismatch {y_true.shape} vs {y_pred.shape}")
    if y_true.size < 2:
        raise ValueError("R² needs at least two samples")
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("R² is undefined for a constant target")
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    return 100.0 * (1.0 - ss_res / ss_tot)


def r2_per_target(Y_true, Y_pred) -> np.ndarray:
    Y_true = np.atleast_2d(np.asarray(Y_true, dtype=float).T).T
    Y_pred = np.atleast_2d(np.asarray(Y_pred, dtype=float).T).T
    return np.array([r2_score(Y_true[:, k], Y_pred[:, k]) for k in range(Y_true.shape[1])])
