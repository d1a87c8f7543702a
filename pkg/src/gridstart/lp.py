"""Bounded-variable primal simplex (two-phase, dense revised form).

Problems are small (tens of variables), so the basis inverse is kept as a
dense matrix and refactored periodically. Pricing is Dantzig's rule until a
run of degenerate pivots is detected, after which Bland's rule is used until
the objective moves again.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

LE, EQ, GE = "<=", "=", ">="
OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"

_PIVOT_TOL = 1e-9
_COST_TOL = 1e-9
_FEAS_TOL = 1e-9
_REFACTOR_EVERY = 40


class LpError(ValueError):
    """Raised for malformed problems or when the iteration limit is exceeded."""


@dataclass
class LpProblem:
    """``minimize c @ x`` subject to ``A[i] @ x (sense_i) b[i]`` and
    ``lower <= x <= upper``."""

    c: np.ndarray
    A: np.ndarray
    senses: Sequence[str]
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    var_names: list[str] | None = None
    row_names: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.shape[0]
        A = np.asarray(self.A, dtype=float)
        if A.size % max(n, 1) or (A.ndim == 2 and A.shape[1] != n):
            raise LpError(f"constraint matrix of shape {A.shape} does not match {n} variables")
        self.A = A.reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float)
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        self.senses = list(self.senses)
        self.validate()

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def validate(self) -> None:
        m, n = self.A.shape
        if self.b.shape != (m,) or len(self.senses) != m:
            raise LpError(f"dimension mismatch: A is {m}x{n}, b has {self.b.shape}, "
                          f"{len(self.senses)} senses")
        bad = [s for s in self.senses if s not in (LE, EQ, GE)]
        if bad:
            raise LpError(f"unknown constraint sense {bad[0]!r}")
        if not np.all(np.isfinite(self.b)) or not np.all(np.isfinite(self.A)):
            raise LpError("A and b must be finite")
        if not np.all(np.isfinite(self.c)):
            raise LpError("c must be finite")
        if np.any(self.lower > self.upper):
            j = int(np.argmax(self.lower > self.upper))
            raise LpError(f"variable {self._vname(j)}: lower bound exceeds upper bound")
        if np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
            raise LpError("bounds must not exclude every finite value")
        if self.var_names is not None and len(self.var_names) != n:
            raise LpError("var_names length does not match c")
        if self.row_names is not None and len(self.row_names) != m:
            raise LpError("row_names length does not match A")

    def _vname(self, j: int) -> str:
        return self.var_names[j] if self.var_names else f"x{j}"

    def _rname(self, i: int) -> str:
        return self.row_names[i] if self.row_names else f"r{i}"

    def dump(self) -> str:
        """Human-readable LP listing, for debugging only."""
        out = ["minimize"]
        out.append("  " + _linear_text(self.c, self._vname))
        out.append("subject to")
        for i in range(self.n_rows):
            out.append(f"  {self._rname(i)}: {_linear_text(self.A[i], self._vname)} "
                       f"{self.senses[i]} {self.b[i]:.12g}")
        out.append("bounds")
        for j in range(self.n_vars):
            out.append(f"  {self.lower[j]:.12g} <= {self._vname(j)} <= {self.upper[j]:.12g}")
        return "\n".join(out) + "\n"


def _linear_text(coef, name) -> str:
    terms = [f"{v:+.12g} {name(j)}" for j, v in enumerate(coef) if v != 0]
    return " ".join(terms) if terms else "0"


@dataclass
class LpSolution:
    status: str
    x: np.ndarray
    objective: float
    duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int
    ray: np.ndarray | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def lp_residuals(problem: LpProblem, x: np.ndarray) -> np.ndarray:
    """Nonnegative violation of every constraint row at ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n_vars,):
        raise LpError(f"x has shape {x.shape}, expected ({problem.n_vars},)")
    ax = problem.A @ x
    senses = np.asarray(problem.senses)
    viol = np.zeros(problem.n_rows)
    le, ge, eq = senses == LE, senses == GE, senses == EQ
    viol[le] = np.maximum(0.0, ax[le] - problem.b[le])
    viol[ge] = np.maximum(0.0, problem.b[ge] - ax[ge])
    viol[eq] = np.abs(ax[eq] - problem.b[eq])
    return viol


def dual_objective(problem: LpProblem, solution: LpSolution) -> float:
    """Lagrangian dual value ``b @ y + sum of bound terms``; -inf if the
    reduced costs are not sign-consistent with the bounds."""
    d = solution.reduced_costs
    tol = 1e-7 * max(1.0, float(np.max(np.abs(problem.c), initial=0.0)))
    total = float(problem.b @ solution.duals)
    for j in range(problem.n_vars):
        if d[j] > tol:
            if not np.isfinite(problem.lower[j]):
                return -np.inf
            total += d[j] * problem.lower[j]
        elif d[j] < -tol:
            if not np.isfinite(problem.upper[j]):
                return -np.inf
            total += d[j] * problem.upper[j]
        else:
            # numerically zero: evaluate at the primal value
            total += d[j] * solution.x[j]
    return total


# ---------------------------------------------------------------------------

class _Simplex:
    """Working state of one solve over the standard-form columns
    ``[structural | row slacks | artificials]``."""

    def __init__(self, problem: LpProblem):
        m, n = problem.A.shape
        senses = problem.senses
        ineq = [i for i, s in enumerate(senses) if s != EQ]
        self.m, self.n = m, n
        self.n_slack = len(ineq)
        S = np.zeros((m, self.n_slack))
        for k, i in enumerate(ineq):
            S[i, k] = 1.0 if senses[i] == LE else -1.0
        lo = np.concatenate([problem.lower, np.zeros(self.n_slack)])
        hi = np.concatenate([problem.upper, np.full(self.n_slack, np.inf)])
        A = np.hstack([problem.A, S])
        N = A.shape[1]
        self.N = N

        x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
        r = problem.b - A @ x
        sign = np.where(r >= 0, 1.0, -1.0)
        self.A = np.hstack([A, np.diag(sign)])
        self.b = problem.b.copy()
        self.lo = np.concatenate([lo, np.zeros(m)])
        self.hi = np.concatenate([hi, np.full(m, np.inf)])
        self.x = np.concatenate([x, np.abs(r)])
        self.basis = np.arange(N, N + m)
        self.is_basic = np.zeros(N + m, dtype=bool)
        self.is_basic[self.basis] = True
        self.Binv = np.diag(sign)
        self.iterations = 0
        self.since_refactor = 0
        self.max_iterations = 200 * (N + m) + 1000

    # -- linear algebra ---------------------------------------------------
    def refactor(self) -> None:
        B = self.A[:, self.basis]
        self.Binv = np.linalg.inv(B)
        nb = ~self.is_basic
        rhs = self.b - self.A[:, nb] @ self.x[nb]
        self.x[self.basis] = self.Binv @ rhs
        self.since_refactor = 0

    def pivot(self, r: int, q: int, alpha: np.ndarray) -> None:
        piv = alpha[r]
        Binv = self.Binv
        row = Binv[r] / piv
        Binv -= np.outer(alpha, row)
        Binv[r] = row
        leaving = self.basis[r]
        self.is_basic[leaving] = False
        self.is_basic[q] = True
        self.basis[r] = q
        self.since_refactor += 1
        if self.since_refactor >= _REFACTOR_EVERY:
            self.refactor()

    # -- main loop --------------------------------------------------------
    def run(self, cost: np.ndarray) -> tuple[str, np.ndarray | None]:
        """Iterate to optimality for ``cost``; returns status and, if
        unbounded, the improving ray over the standard-form columns."""
        degenerate = 0
        bland = False
        scale = max(1.0, float(np.max(np.abs(cost))))
        while True:
            if self.iterations >= self.max_iterations:
                raise LpError("simplex iteration limit exceeded")
            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.A
            nb = ~self.is_basic
            movable = nb & (self.hi > self.lo)
            can_up = movable & (d < -_COST_TOL * scale) & (self.x < self.hi)
            can_dn = movable & (d > _COST_TOL * scale) & (self.x > self.lo)
            cand = np.flatnonzero(can_up | can_dn)
            if cand.size == 0:
                return OPTIMAL, None
            q = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if d[q] < 0 else -1.0

            alpha = self.Binv @ self.A[:, q]
            da = direction * alpha  # basic values change by -t * da
            xb = self.x[self.basis]
            lob, hib = self.lo[self.basis], self.hi[self.basis]
            ratios = np.full(self.m, np.inf)
            dec = da > _PIVOT_TOL
            inc = da < -_PIVOT_TOL
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios[dec] = (xb[dec] - lob[dec]) / da[dec]
                ratios[inc] = (hib[inc] - xb[inc]) / (-da[inc])
            ratios = np.maximum(ratios, 0.0)
            t_flip = self.hi[q] - self.lo[q]
            t_min = float(np.min(ratios)) if self.m else np.inf
            if not np.isfinite(t_min) and not np.isfinite(t_flip):
                ray = np.zeros(self.A.shape[1])
                ray[q] = direction
                ray[self.basis] = -da
                return UNBOUNDED, ray
            self.iterations += 1
            if t_flip <= t_min:
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
                self.x[self.basis] = xb - t_flip * da
                degenerate = 0
                bland = False
                continue
            ties = np.flatnonzero(ratios <= t_min + 1e-12)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            t = float(ratios[r])
            leaving = self.basis[r]
            self.x[self.basis] = xb - t * da
            self.x[leaving] = lob[r] if da[r] > 0 else hib[r]
            self.x[q] += direction * t
            self.pivot(r, q, alpha)
            if t <= 1e-12:
                degenerate += 1
                if degenerate > 2 * self.N:
                    bland = True
            else:
                degenerate = 0
                bland = False


def solve_lp(problem: LpProblem) -> LpSolution:
    """Solve ``problem`` with the two-phase bounded-variable primal simplex.

    Returns an :class:`LpSolution` whose ``status`` is ``"optimal"``,
    ``"infeasible"`` (phase-1 minimum is positive) or ``"unbounded"`` (``ray``
    holds an improving direction over the original variables).
    """
    problem.validate()
    sx = _Simplex(problem)
    m, n, N = sx.m, sx.n, sx.N
    art = np.arange(N, N + m)

    cost1 = np.zeros(N + m)
    cost1[art] = 1.0
    sx.run(cost1)
    sx.refactor()
    infeas = float(np.sum(sx.x[art]))
    bscale = max(1.0, float(np.max(np.abs(problem.b), initial=0.0)))
    if infeas > 1e-8 * bscale:
        return LpSolution(INFEASIBLE, sx.x[:n].copy(), np.nan, np.full(m, np.nan),
                          np.full(n, np.nan), sx.iterations)

    # pin artificials at zero and pivot them out of the basis where possible
    sx.hi[art] = 0.0
    sx.x[art] = 0.0
    for r in range(m):
        if sx.basis[r] < N:
            continue
        row = sx.Binv[r] @ sx.A[:, :N]
        row[sx.is_basic[:N]] = 0.0
        cols = np.flatnonzero(np.abs(row) > 1e-7)
        if cols.size:
            q = int(cols[np.argmax(np.abs(row[cols]))])
            alpha = sx.Binv @ sx.A[:, q]
            sx.pivot(r, q, alpha)
    sx.refactor()

    cost2 = np.zeros(N + m)
    cost2[:n] = problem.c
    status, ray = sx.run(cost2)
    sx.refactor()
    x = sx.x[:n].copy()
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, x, -np.inf, np.full(m, np.nan), np.full(n, np.nan),
                          sx.iterations, ray=ray[:n])
    y = cost2[sx.basis] @ sx.Binv
    d = problem.c - y @ problem.A
    return LpSolution(OPTIMAL, x, float(problem.c @ x), y, d, sx.iterations)
