"""Newton-Raphson AC power flow in polar coordinates and feasibility metrics.

The numerical kernels operate on voltage arrays with a leading batch axis so
that the ACOPF oracle can evaluate thousands of setpoints in one call; the
public :func:`solve_power_flow` is the single-scenario entry point with
generator reactive-limit handling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .network import PQ, PV, SLACK, NetworkCase, branch_admittances, build_ybus


class PowerFlowError(RuntimeError):
    """Raised when the Newton iteration cannot proceed (singular Jacobian)."""


@dataclass(frozen=True)
class LoadScenario:
    """Per-bus demand in MW / MVAr, ordered like ``case.buses``."""

    p_mw: tuple[float, ...]
    q_mvar: tuple[float, ...]

    def __post_init__(self):
        if len(self.p_mw) != len(self.q_mvar):
            raise ValueError("p_mw and q_mvar must have one entry per bus")
        if not all(math.isfinite(v) for v in self.p_mw + self.q_mvar):
            raise ValueError("demands must be finite")

    @classmethod
    def at_bus(cls, bus_id: int, p_mw: float, q_mvar: float, n_bus: int = 3) -> LoadScenario:
        p = [0.0] * n_bus
        q = [0.0] * n_bus
        p[bus_id - 1] = float(p_mw)
        q[bus_id - 1] = float(q_mvar)
        return cls(tuple(p), tuple(q))

    @property
    def p3l(self) -> float:
        return self.p_mw[2]

    @property
    def q3l(self) -> float:
        return self.q_mvar[2]

    @property
    def total_p(self) -> float:
        return float(sum(self.p_mw))


@dataclass(frozen=True)
class DispatchSetpoint:
    """Generator schedule: active power (MW) and terminal voltage (pu), one entry
    per generator in case order. The slack generator's ``p_mw`` is the intended
    dispatch only; the power flow computes its actual output."""

    p_mw: tuple[float, ...]
    v_pu: tuple[float, ...]

    def __post_init__(self):
        if len(self.p_mw) != len(self.v_pu):
            raise ValueError("p_mw and v_pu must have one entry per generator")
        if not all(math.isfinite(v) for v in self.p_mw + self.v_pu):
            raise ValueError("setpoint values must be finite")
        if not all(0.5 <= v <= 1.5 for v in self.v_pu):
            raise ValueError(f"voltage setpoint outside [0.5, 1.5] pu: {self.v_pu}")


@dataclass(frozen=True)
class PfOptions:
    tolerance: float = 1e-8
    max_iterations: int = 20
    flat_start: bool = True
    enforce_q_limits: bool = True

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class PowerFlowSolution:
    vm: np.ndarray
    va: np.ndarray
    s_from: np.ndarray  # complex MVA entering each branch at its from end
    s_to: np.ndarray
    gen_p: np.ndarray  # MW per generator
    gen_q: np.ndarray  # MVAr per generator
    converged: bool
    iterations: int
    max_mismatch: float
    slack_gen: int
    q_limited: tuple[int, ...] = field(default=())

    @property
    def voltage(self) -> np.ndarray:
        return self.vm * np.exp(1j * self.va)

    @property
    def slack_p(self) -> float:
        return float(self.gen_p[self.slack_gen])

    @property
    def slack_q(self) -> float:
        return float(self.gen_q[self.slack_gen])

    @property
    def losses_mw(self) -> float:
        return float(np.sum(self.s_from + self.s_to).real)

    @property
    def branch_mva(self) -> np.ndarray:
        return np.maximum(np.abs(self.s_from), np.abs(self.s_to))


# ---------------------------------------------------------------------------
# kernels (batch axis first)

def power_injections(Y: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Complex bus injections ``V * conj(Y V)`` in per unit; ``V`` is (..., n)."""
    return V * np.conj(V @ Y.T)


def dS_dV(Y: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives of the complex injections with respect to angle and magnitude.

    Returns ``(dS_dVa, dS_dVm)``, each shaped (..., n, n).
    """
    I = V @ Y.T
    Vnorm = V / np.abs(V)
    diag = np.arange(V.shape[-1])
    dS_dVm = V[..., :, None] * np.conj(Y * Vnorm[..., None, :])
    dS_dVm[..., diag, diag] += np.conj(I) * Vnorm
    dS_dVa = -1j * V[..., :, None] * np.conj(Y * V[..., None, :])
    dS_dVa[..., diag, diag] += 1j * V * np.conj(I)
    return dS_dVa, dS_dVm


def mismatch_vector(Y, V, Sspec, pvpq, pq) -> np.ndarray:
    dS = power_injections(Y, V) - Sspec
    return np.concatenate([dS.real[..., pvpq], dS.imag[..., pq]], axis=-1)


def jacobian(Y, V, pvpq, pq) -> np.ndarray:
    dVa, dVm = dS_dV(Y, V)
    top = np.concatenate([dVa.real[..., pvpq[:, None], pvpq], dVm.real[..., pvpq[:, None], pq]], axis=-1)
    bot = np.concatenate([dVa.imag[..., pq[:, None], pvpq], dVm.imag[..., pq[:, None], pq]], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def _apply_step(V, dx, pvpq, pq):
    va = np.angle(V)
    vm = np.abs(V)
    npvpq = len(pvpq)
    va[..., pvpq] -= dx[..., :npvpq]
    vm[..., pq] -= dx[..., npvpq:]
    return vm * np.exp(1j * va)


# ---------------------------------------------------------------------------
# helpers shared by single and batched solves

def _bus_types(case: NetworkCase) -> tuple[int, np.ndarray, np.ndarray]:
    kinds = [b.kind for b in case.buses]
    slack = kinds.index(SLACK)
    pv = np.array([i for i, k in enumerate(kinds) if k == PV], dtype=int)
    pq = np.array([i for i, k in enumerate(kinds) if k == PQ], dtype=int)
    return slack, pv, pq


def _scheduled_injection(case: NetworkCase, pg_mw: np.ndarray, scenario: LoadScenario) -> np.ndarray:
    """Scheduled complex injection per bus (pu); ``pg_mw`` is (..., n_gen).

    Reactive generation is unknown at generator buses and left at zero; those
    entries are never part of the mismatch."""
    n = case.n_bus
    load = (np.asarray(scenario.p_mw) + 1j * np.asarray(scenario.q_mvar)) / case.base_mva
    S = np.zeros(pg_mw.shape[:-1] + (n,), dtype=complex) - load
    for g, gen in enumerate(case.generators):
        S[..., case.bus_index(gen.bus)] += pg_mw[..., g] / case.base_mva
    return S


def _initial_voltage(case: NetworkCase, vg: np.ndarray) -> np.ndarray:
    V = np.ones(vg.shape[:-1] + (case.n_bus,), dtype=complex)
    for g, gen in enumerate(case.generators):
        V[..., case.bus_index(gen.bus)] = vg[..., g]
    return V


def _generator_outputs(case, Y, V, pg_mw, scenario):
    """Generator P, Q in MW / MVAr given converged voltages.

    The slack generator takes the residual active power; reactive output at a
    bus is shared equally among its generators."""
    S = power_injections(Y, V) * case.base_mva
    load = np.asarray(scenario.p_mw) + 1j * np.asarray(scenario.q_mvar)
    Sgen_bus = S + load
    gen_p = np.array(pg_mw, dtype=float, copy=True)
    gen_q = np.zeros_like(gen_p)
    slack_gen = case.slack_generator
    sidx = case.bus_index(case.generators[slack_gen].bus)
    others = [g for g in case.generators_at(case.generators[slack_gen].bus) if g != slack_gen]
    gen_p[..., slack_gen] = Sgen_bus[..., sidx].real - sum(gen_p[..., g] for g in others)
    for b in {gen.bus for gen in case.generators}:
        gens = case.generators_at(b)
        for g in gens:
            gen_q[..., g] = Sgen_bus[..., case.bus_index(b)].imag / len(gens)
    return gen_p, gen_q


def branch_flows(case: NetworkCase, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Complex branch flows in MVA at from and to ends."""
    Yf, Yt = branch_admittances(case)
    f = np.array([case.bus_index(br.from_bus) for br in case.branches], dtype=int)
    t = np.array([case.bus_index(br.to_bus) for br in case.branches], dtype=int)
    s_from = V[..., f] * np.conj(V @ Yf.T) * case.base_mva
    s_to = V[..., t] * np.conj(V @ Yt.T) * case.base_mva
    return s_from, s_to


# ---------------------------------------------------------------------------
# single solve

def solve_power_flow(case: NetworkCase, setpoint: DispatchSetpoint, scenario: LoadScenario,
                     options: PfOptions = PfOptions(), initial: np.ndarray | None = None
                     ) -> PowerFlowSolution:
    """Solve the AC power flow for one generator schedule and one demand point.

    Parameters
    ----------
    case : NetworkCase
    setpoint : DispatchSetpoint
        Active power of every non-slack generator and terminal voltage of
        every generator.
    scenario : LoadScenario
    options : PfOptions
    initial : complex ndarray, optional
        Starting bus voltages, used when ``options.flat_start`` is False.

    Returns
    -------
    PowerFlowSolution
        ``converged`` is False when the mismatch tolerance is not reached
        within ``options.max_iterations``.

    Raises
    ------
    PowerFlowError
        If the Jacobian is singular.
    """
    ng = len(case.generators)
    if len(setpoint.p_mw) != ng:
        raise ValueError(f"setpoint covers {len(setpoint.p_mw)} generators, case has {ng}")
    if len(scenario.p_mw) != case.n_bus:
        raise ValueError(f"scenario covers {len(scenario.p_mw)} buses, case has {case.n_bus}")
    Y = build_ybus(case)
    pg = np.asarray(setpoint.p_mw, dtype=float)
    vg = np.asarray(setpoint.v_pu, dtype=float)
    slack, pv0, pq0 = _bus_types(case)
    Sspec = _scheduled_injection(case, pg, scenario)
    V = _initial_voltage(case, vg)
    if not options.flat_start and initial is not None:
        V = np.asarray(initial, dtype=complex).copy()
        V[[case.bus_index(g.bus) for g in case.generators]] = (
            vg * np.exp(1j * np.angle(V[[case.bus_index(g.bus) for g in case.generators]])))
    vset = np.abs(_initial_voltage(case, vg))

    # reactive limits per PV bus, summed over its generators (pu)
    qlim = {}
    for i in pv0:
        gens = case.generators_at(case.buses[i].id)
        qlim[i] = (sum(case.generators[g].q_min for g in gens) / case.base_mva,
                   sum(case.generators[g].q_max for g in gens) / case.base_mva)
    qload = np.asarray(scenario.q_mvar) / case.base_mva
    limited: dict[int, float] = {}  # bus index -> fixed Qgen (pu)

    converged = False
    mis = np.inf
    it = 0
    for it in range(1, options.max_iterations + 1):
        pv = np.array([i for i in pv0 if i not in limited], dtype=int)
        pq = np.array(sorted(list(pq0) + list(limited)), dtype=int)
        pvpq = np.array(sorted(list(pv) + list(pq)), dtype=int)
        for i, qg in limited.items():
            Sspec[i] = Sspec[i].real + 1j * (qg - qload[i])
        F = mismatch_vector(Y, V, Sspec, pvpq, pq)
        mis = float(np.max(np.abs(F))) if F.size else 0.0
        if mis < options.tolerance:
            converged = True
            break
        J = jacobian(Y, V, pvpq, pq)
        try:
            dx = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            raise PowerFlowError(f"singular Jacobian at iteration {it}") from None
        V = _apply_step(V, dx, pvpq, pq)
        if not np.all(np.isfinite(V)):
            break
        if options.enforce_q_limits and it >= 2:
            _update_q_limits(Y, V, pv0, qlim, qload, vset, limited)

    gen_p, gen_q = _generator_outputs(case, Y, V, pg, scenario)
    s_from, s_to = branch_flows(case, V)
    return PowerFlowSolution(
        vm=np.abs(V), va=np.angle(V), s_from=s_from, s_to=s_to, gen_p=gen_p, gen_q=gen_q,
        converged=converged, iterations=it, max_mismatch=mis, slack_gen=case.slack_generator,
        q_limited=tuple(sorted(case.buses[i].id for i in limited)),
    )


def _update_q_limits(Y, V, pv0, qlim, qload, vset, limited):
    qgen = power_injections(Y, V).imag + qload
    for i in pv0:
        lo, hi = qlim[i]
        if i in limited:
            at_hi = limited[i] == hi
            # release the bus when its voltage moves back across the setpoint
            if (at_hi and abs(V[i]) > vset[i]) or (not at_hi and abs(V[i]) < vset[i]):
                del limited[i]
                V[i] = vset[i] * V[i] / abs(V[i])
        elif qgen[i] > hi:
            limited[i] = hi
        elif qgen[i] < lo:
            limited[i] = lo


# ---------------------------------------------------------------------------
# batched solve (no reactive-limit switching)

@dataclass(frozen=True)
class BatchPowerFlow:
    vm: np.ndarray  # (B, n)
    va: np.ndarray
    gen_p: np.ndarray  # (B, n_gen)
    gen_q: np.ndarray
    s_from: np.ndarray  # (B, n_branch)
    s_to: np.ndarray
    converged: np.ndarray  # (B,) bool
    max_mismatch: np.ndarray


@njit(cache=True)
def _solve_small(A, b):
    """Gaussian elimination with partial pivoting; returns (x, ok)."""
    n = b.shape[0]
    A = A.copy()
    x = b.copy()
    for k in range(n):
        p = k
        for i in range(k + 1, n):
            if abs(A[i, k]) > abs(A[p, k]):
                p = i
        if not abs(A[p, k]) > 1e-300:
            return x, False
        if p != k:
            for j in range(n):
                A[k, j], A[p, j] = A[p, j], A[k, j]
            x[k], x[p] = x[p], x[k]
        for i in range(k + 1, n):
            f = A[i, k] / A[k, k]
            for j in range(k, n):
                A[i, j] -= f * A[k, j]
            x[i] -= f * x[k]
    for k in range(n - 1, -1, -1):
        acc = x[k]
        for j in range(k + 1, n):
            acc -= A[k, j] * x[j]
        x[k] = acc / A[k, k]
    return x, True


@njit(cache=True)
def _newton_batch_kernel(Y, V, Sspec, pvpq, pq, tolerance, max_iterations):
    """Per-candidate Newton-Raphson; ``V`` (B, n) is updated in place.

    Returns the last mismatch norm of each candidate (inf if it failed).
    """
    nb, n = V.shape
    npv = pvpq.shape[0]
    m = npv + pq.shape[0]
    mis = np.full(nb, np.inf)
    pos_a = np.full(n, -1)
    pos_m = np.full(n, -1)
    for k in range(npv):
        pos_a[pvpq[k]] = k
    for k in range(pq.shape[0]):
        pos_m[pq[k]] = npv + k
    I = np.empty(n, dtype=np.complex128)
    F = np.empty(m)
    J = np.empty((m, m))
    for c in range(nb):
        v = V[c]
        for _ in range(max_iterations):
            for i in range(n):
                acc = 0j
                for j in range(n):
                    acc += Y[i, j] * v[j]
                I[i] = acc
            worst = 0.0
            for k in range(npv):
                i = pvpq[k]
                F[k] = (v[i] * np.conj(I[i]) - Sspec[c, i]).real
            for k in range(pq.shape[0]):
                i = pq[k]
                F[npv + k] = (v[i] * np.conj(I[i]) - Sspec[c, i]).imag
            for k in range(m):
                a = abs(F[k])
                if not a <= worst:
                    worst = a
            mis[c] = worst
            if worst < tolerance or not np.isfinite(worst):
                break
            J[:, :] = 0.0
            for i in range(n):
                ra, rm = pos_a[i], pos_m[i]
                if ra < 0 and rm < 0:
                    continue
                vi = v[i]
                for j in range(n):
                    ca, cm = pos_a[j], pos_m[j]
                    if ca < 0 and cm < 0:
                        continue
                    vn = v[j] / abs(v[j])
                    d_va = -1j * vi * np.conj(Y[i, j] * v[j])
                    d_vm = vi * np.conj(Y[i, j] * vn)
                    if i == j:
                        d_va += 1j * vi * np.conj(I[i])
                        d_vm += np.conj(I[i]) * vn
                    if ra >= 0:
                        if ca >= 0:
                            J[ra, ca] = d_va.real
                        if cm >= 0:
                            J[ra, cm] = d_vm.real
                    if rm >= 0:
                        if ca >= 0:
                            J[rm, ca] = d_va.imag
                        if cm >= 0:
                            J[rm, cm] = d_vm.imag
            dx, ok = _solve_small(J, F)
            if not ok:
                mis[c] = np.inf
                break
            for i in range(n):
                if pos_a[i] < 0 and pos_m[i] < 0:
                    continue
                va = np.angle(v[i])
                vm = abs(v[i])
                if pos_a[i] >= 0:
                    va -= dx[pos_a[i]]
                if pos_m[i] >= 0:
                    vm -= dx[pos_m[i]]
                v[i] = vm * np.exp(1j * va)
        else:
            # loop exhausted: record the final mismatch
            worst = 0.0
            for i in range(n):
                acc = 0j
                for j in range(n):
                    acc += Y[i, j] * v[j]
                I[i] = acc
            for k in range(npv):
                i = pvpq[k]
                a = abs((v[i] * np.conj(I[i]) - Sspec[c, i]).real)
                if not a <= worst:
                    worst = a
            for k in range(pq.shape[0]):
                i = pq[k]
                a = abs((v[i] * np.conj(I[i]) - Sspec[c, i]).imag)
                if not a <= worst:
                    worst = a
            mis[c] = worst
    return mis


def solve_power_flow_batch(case: NetworkCase, pg_mw: np.ndarray, vg_pu: np.ndarray,
                           scenario: LoadScenario, tolerance: float = 1e-8,
                           max_iterations: int = 20) -> BatchPowerFlow:
    """Solve many power flows that share case and demand at once.

    ``pg_mw`` and ``vg_pu`` are (B, n_gen). Generator buses hold their voltage
    regardless of reactive limits; callers check ``gen_q`` themselves.
    """
    pg = np.atleast_2d(np.asarray(pg_mw, dtype=float))
    vg = np.atleast_2d(np.asarray(vg_pu, dtype=float))
    Y = build_ybus(case)
    slack, pv, pq = _bus_types(case)
    pvpq = np.array(sorted(list(pv) + list(pq)), dtype=int)
    Sspec = _scheduled_injection(case, pg, scenario)
    V = _initial_voltage(case, vg)
    mis = _newton_batch_kernel(Y, V, Sspec, pvpq, pq, float(tolerance), int(max_iterations))
    converged = mis < tolerance
    gen_p, gen_q = _generator_outputs(case, Y, V, pg, scenario)
    s_from, s_to = branch_flows(case, V)
    return BatchPowerFlow(np.abs(V), np.angle(V), gen_p, gen_q, s_from, s_to, converged, mis)


# ---------------------------------------------------------------------------
# metrics

def slack_change(solution: PowerFlowSolution, intended_slack_p: float) -> float:
    """Absolute gap (MW) between the slack output found by the power flow and
    the dispatch that was intended for it."""
    if not solution.converged:
        raise ValueError("slack change is undefined for a non-converged power flow")
    return abs(solution.slack_p - intended_slack_p)


def thermal_violation(solution: PowerFlowSolution, case: NetworkCase) -> np.ndarray:
    """Per-branch overload in MVA above the rating; zero for unlimited branches."""
    if not solution.converged:
        raise ValueError("thermal violation is undefined for a non-converged power flow")
    rating = np.array([br.rating_mva for br in case.branches])
    over = np.maximum(0.0, solution.branch_mva - rating)
    return np.where(rating > 0, over, 0.0)


def dispatch_cost(case: NetworkCase, solution: PowerFlowSolution) -> float:
    return float(sum(g.cost(p) for g, p in zip(case.generators, solution.gen_p)))


def generation_cost(case: NetworkCase, gen_p: Sequence[float] | np.ndarray) -> np.ndarray:
    """Vectorized cost over a trailing generator axis."""
    gen_p = np.asarray(gen_p, dtype=float)
    c0 = np.array([g.cost_c0 for g in case.generators])
    c1 = np.array([g.cost_c1 for g in case.generators])
    c2 = np.array([g.cost_c2 for g in case.generators])
    return np.sum(c0 + c1 * gen_p + c2 * gen_p ** 2, axis=-1)
