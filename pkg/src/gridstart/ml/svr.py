"""Epsilon-insensitive support vector regression with an RBF kernel.

The dual is solved by sequential minimal optimization over the doubled
variable vector ``(alpha, alpha*)`` with second-order working-set selection.
Features and the target are standardized; ``epsilon`` is in standardized
target units.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .base import Standardizer

TAU = 1e-12
KKT_TOLERANCE = 1e-3
MAX_ITERATIONS = 1_000_000


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(d2, 0.0))


@njit(cache=True)
def _smo(K, target, C, eps, tol, max_iter):
    l = target.size
    m = 2 * l
    alpha = np.zeros(m)
    sign = np.empty(m)
    G = np.empty(m)
    for i in range(l):
        sign[i] = 1.0
        sign[i + l] = -1.0
        G[i] = eps - target[i]
        G[i + l] = eps + target[i]
    gap = np.inf
    it = 0
    while it < max_iter:
        # first index: maximal violating pair, up side
        gmax = -np.inf
        i = -1
        for t in range(m):
            if sign[t] > 0:
                if alpha[t] < C and -G[t] >= gmax:
                    gmax = -G[t]
                    i = t
            else:
                if alpha[t] > 0 and G[t] >= gmax:
                    gmax = G[t]
                    i = t
        gmax2 = -np.inf
        j = -1
        best = np.inf
        if i >= 0:
            ki = i % l
            for t in range(m):
                kt = t % l
                if sign[t] > 0:
                    if alpha[t] > 0:
                        diff = gmax + G[t]
                        if G[t] >= gmax2:
                            gmax2 = G[t]
                    else:
                        continue
                else:
                    if alpha[t] < C:
                        diff = gmax - G[t]
                        if -G[t] >= gmax2:
                            gmax2 = -G[t]
                    else:
                        continue
                if diff > 0:
                    quad = K[ki, ki] + K[kt, kt] - 2.0 * K[ki, kt]
                    if quad <= 0:
                        quad = TAU
                    obj = -(diff * diff) / quad
                    if obj <= best:
                        best = obj
                        j = t
        gap = gmax + gmax2
        if gap < tol or j < 0:
            break
        it += 1
        ki = i % l
        kj = j % l
        qij = sign[i] * sign[j] * K[ki, kj]
        ai_old = alpha[i]
        aj_old = alpha[j]
        if sign[i] != sign[j]:
            quad = K[ki, ki] + K[kj, kj] + 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai_old - aj_old
            ai = ai_old + delta
            aj = aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj = 0.0
                    ai = diff
            else:
                if ai < 0:
                    ai = 0.0
                    aj = -diff
            if diff > 0:
                if ai > C:
                    ai = C
                    aj = C - diff
            else:
                if aj > C:
                    aj = C
                    ai = C + diff
        else:
            quad = K[ki, ki] + K[kj, kj] - 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = ai_old + aj_old
            ai = ai_old - delta
            aj = aj_old + delta
            if total > C:
                if ai > C:
                    ai = C
                    aj = total - C
            else:
                if aj < 0:
                    aj = 0.0
                    ai = total
            if total > C:
                if aj > C:
                    aj = C
                    ai = total - C
            else:
                if ai < 0:
                    ai = 0.0
                    aj = total
        alpha[i] = ai
        alpha[j] = aj
        dai = ai - ai_old
        daj = aj - aj_old
        for t in range(m):
            kt = t % l
            G[t] += sign[t] * (sign[i] * K[ki, kt] * dai + sign[j] * K[kj, kt] * daj)

    # bias from free variables, else the midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    n_free = 0
    s_free = 0.0
    for t in range(m):
        yg = sign[t] * G[t]
        if alpha[t] >= C:
            if sign[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if sign[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            s_free += yg
    rho = s_free / n_free if n_free > 0 else 0.5 * (ub + lb)
    return alpha[:l] - alpha[l:], rho, gap, it


@dataclass(frozen=True)
class SvrRegressor:
    """Fitted single-target SVR.

    Only training points with a nonzero dual coefficient are kept. ``kkt_gap``
    is the maximal KKT violation at exit; ``converged`` is False when the
    iteration cap was reached first.
    """

    support: np.ndarray
    coef: np.ndarray
    rho: float
    C: float
    epsilon: float
    gamma: float
    x_std: Standardizer
    y_std: Standardizer
    kkt_gap: float
    iterations: int
    converged: bool

    family = "svm"

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, C: float = 10.0, epsilon: float = 0.01,
            gamma: float = 1.0, tolerance: float = KKT_TOLERANCE,
            max_iterations: int = MAX_ITERATIONS) -> SvrRegressor:
        if not (C > 0 and epsilon >= 0 and gamma > 0):
            raise ValueError("need C > 0, epsilon >= 0, gamma > 0")
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        x_std = Standardizer.fit(X)
        y_std = Standardizer.fit(y[:, None])
        Z = x_std.transform(X)
        t = y_std.transform(y[:, None]).ravel()
        K = rbf_kernel(Z, Z, gamma)
        beta, rho, gap, it = _smo(K, t, float(C), float(epsilon), float(tolerance), int(max_iterations))
        keep = beta != 0.0
        return cls(Z[keep], beta[keep], float(rho), float(C), float(epsilon), float(gamma),
                   x_std, y_std, float(gap), int(it), bool(gap < tolerance))

    @property
    def n_support(self) -> int:
        return int(self.coef.size)

    def decision(self, X: np.ndarray) -> np.ndarray:
        """Prediction in standardized target units."""
        Q = self.x_std.transform(np.atleast_2d(X))
        if self.coef.size == 0:
            return np.full(Q.shape[0], -self.rho)
        return rbf_kernel(Q, self.support, self.gamma) @ self.coef - self.rho

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.y_std.inverse(self.decision(X)[:, None]).ravel()

    def hyperparameters(self) -> dict:
        return {"C": self.C, "epsilon": self.epsilon, "gamma": self.gamma}

    def to_dict(self) -> dict:
        return {
            "support": self.support.tolist(),
            "coef": self.coef.tolist(),
            "rho": self.rho,
            "x_std": self.x_std.to_dict(),
            "y_std": self.y_std.to_dict(),
            "kkt_gap": self.kkt_gap,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: dict, hyper: dict) -> SvrRegressor:
        x_std = Standardizer.from_dict(d["x_std"])
        coef = np.array(d["coef"], dtype=float)
        support = np.array(d["support"], dtype=float).reshape(coef.size, x_std.mean.size)
        return cls(support, coef, float(d["rho"]), float(hyper["C"]), float(hyper["epsilon"]),
                   float(hyper["gamma"]), x_std, Standardizer.from_dict(d["y_std"]),
                   float(d["kkt_gap"]), int(d["iterations"]), bool(d["converged"]))
