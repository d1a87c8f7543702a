"""Successive linear programming for the current-voltage (IV) ACOPF.

The state holds rectangular bus voltages ``e + jf``, bus injection currents
``Ir + jIi`` and generator outputs. Each iteration linearizes the model around
the state and solves an LP inside a trust region on the voltage components:

* ``I = Y V`` is linear and kept exactly;
* the bilinear balances ``P = e Ir + f Ii`` and ``Q = f Ir - e Ii`` are
  replaced by their first-order Taylor rows, each with a penalized elastic
  pair so that every subproblem is feasible;
* voltage magnitude is bounded through its linearization along the current
  phasor, which for the lower bound is the supporting halfplane;
* the branch apparent-power limit ``|V_end| |I| <= rating`` bounds the
  current by a regular octagon aligned with the current phasor at the state,
  each facet scaled by the linearized end voltage.

Steps are accepted when the nonlinear merit (cost plus penalty times total
constraint violation) strictly decreases.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lp import EQ, LE, LpProblem, LpSolution, solve_lp
from .network import NetworkCase, branch_admittances, build_ybus
from .powerflow import LoadScenario, PowerFlowSolution, generation_cost

PENALTY = 1e4  # $/h per pu of constraint violation
OCTAGON_FACETS = 8
MAX_RADIUS = 1.0
MIN_RADIUS = 1e-10


@dataclass(frozen=True)
class IvState:
    """Rectangular voltages and injection currents (pu, per bus) plus
    generator outputs (MW / MVAr, per generator)."""

    e: np.ndarray
    f: np.ndarray
    ir: np.ndarray
    ii: np.ndarray
    p_mw: np.ndarray
    q_mvar: np.ndarray

    def __post_init__(self):
        for name in ("e", "f", "ir", "ii", "p_mw", "q_mvar"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))

    @property
    def voltage(self) -> np.ndarray:
        return self.e + 1j * self.f

    @property
    def current(self) -> np.ndarray:
        return self.ir + 1j * self.ii

    @property
    def vm(self) -> np.ndarray:
        return np.hypot(self.e, self.f)

    def in_sanity_band(self) -> bool:
        v2 = self.e ** 2 + self.f ** 2
        return bool(np.all(np.isfinite(v2)) and np.all((v2 >= 0.25) & (v2 <= 2.25)))


@dataclass(frozen=True)
class SlpOptions:
    step_tolerance: float = 1e-6
    mismatch_tolerance: float = 1e-6
    trust_radius_initial: float = 0.1
    shrink: float = 0.5
    expand: float = 1.5
    max_iterations: int = 100
    # stop when the LP cannot predict more than this merit decrease ($/h)
    # per pu of trust radius: the state is first-order stationary
    criticality_tolerance: float = 0.1
    # or when the decrease predicted within the initial radius is below this
    # fraction of the cost: near a non-vertex optimum constraint curvature
    # caps the usable radius, so the per-radius test alone would shrink the
    # radius down to step_tolerance
    relative_gain_tolerance: float = 1e-4
    penalty: float = PENALTY

    def __post_init__(self):
        if not 0 < self.shrink < 1 < self.expand:
            raise ValueError("need 0 < shrink < 1 < expand")
        if min(self.step_tolerance, self.mismatch_tolerance, self.trust_radius_initial,
               self.criticality_tolerance, self.relative_gain_tolerance, self.penalty) <= 0:
            raise ValueError("tolerances, radius and penalty must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    radius: float
    step_norm: float
    objective: float
    mismatch: float
    accepted: bool
    merit: float = math.nan


@dataclass(frozen=True)
class SlpResult:
    state: IvState
    objective: float
    iterations: int
    converged: bool
    trace: list[TraceRow] = field(default_factory=list)
    message: str = ""


# ---------------------------------------------------------------------------
# state construction and evaluation

def state_from_power_flow(solution: PowerFlowSolution, case: NetworkCase) -> IvState:
    if not solution.converged:
        raise ValueError("cannot build an IV state from a non-converged power flow")
    V = solution.vm * np.exp(1j * solution.va)
    I = build_ybus(case) @ V
    return IvState(V.real, V.imag, I.real, I.imag, solution.gen_p, solution.gen_q)


def flat_start(case: NetworkCase, scenario: LoadScenario) -> IvState:
    """``e = 1, f = 0``, currents from ``Y V``, active demand shared in
    proportion to ``p_max`` (clipped to limits), no reactive output."""
    n = case.n_bus
    V = np.ones(n, dtype=complex)
    I = build_ybus(case) @ V
    pmax = np.array([g.p_max for g in case.generators])
    pmin = np.array([g.p_min for g in case.generators])
    share = pmax / pmax.sum() if pmax.sum() > 0 else np.full(len(pmax), 1 / len(pmax))
    p = np.clip(share * scenario.total_p, pmin, pmax)
    return IvState(V.real, V.imag, I.real, I.imag, p, np.zeros(len(pmax)))


def _gen_incidence(case: NetworkCase) -> np.ndarray:
    C = np.zeros((case.n_bus, len(case.generators)))
    for g, gen in enumerate(case.generators):
        C[case.bus_index(gen.bus), g] = 1.0
    return C


def balance_residual(case: NetworkCase, scenario: LoadScenario, state: IvState) -> tuple[np.ndarray, np.ndarray]:
    """Per-bus ``(P, Q)`` residuals in pu: network injection minus net
    scheduled injection."""
    C = _gen_incidence(case)
    base = case.base_mva
    p_net = (C @ state.p_mw - np.asarray(scenario.p_mw)) / base
    q_net = (C @ state.q_mvar - np.asarray(scenario.q_mvar)) / base
    p_inj = state.e * state.ir + state.f * state.ii
    q_inj = state.f * state.ir - state.e * state.ii
    return p_inj - p_net, q_inj - q_net


def _end_indices(case: NetworkCase) -> tuple[np.ndarray, np.ndarray]:
    f = np.array([case.bus_index(br.from_bus) for br in case.branches], dtype=int)
    t = np.array([case.bus_index(br.to_bus) for br in case.branches], dtype=int)
    return f, t


def violations(case: NetworkCase, scenario: LoadScenario, state: IvState) -> dict[str, np.ndarray]:
    """Nonnegative violation vectors, all in pu."""
    rp, rq = balance_residual(case, scenario, state)
    V = state.voltage
    vm = np.abs(V)
    vmin = np.array([b.v_min for b in case.buses])
    vmax = np.array([b.v_max for b in case.buses])
    base = case.base_mva
    pmin = np.array([g.p_min for g in case.generators]) / base
    pmax = np.array([g.p_max for g in case.generators]) / base
    qmin = np.array([g.q_min for g in case.generators]) / base
    qmax = np.array([g.q_max for g in case.generators]) / base
    p, q = state.p_mw / base, state.q_mvar / base
    Yf, Yt = branch_admittances(case)
    fi, ti = _end_indices(case)
    rating = np.array([br.rating_mva for br in case.branches]) / base
    s_from = vm[fi] * np.abs(Yf @ V)
    s_to = vm[ti] * np.abs(Yt @ V)
    over = np.maximum(0.0, np.maximum(s_from, s_to) - rating)
    I_gap = np.abs(state.current - build_ybus(case) @ V)
    return {
        "p_balance": np.abs(rp),
        "q_balance": np.abs(rq),
        "current": I_gap,
        "voltage": np.maximum(0.0, vmin - vm) + np.maximum(0.0, vm - vmax),
        "generation": (np.maximum(0.0, pmin - p) + np.maximum(0.0, p - pmax)
                       + np.maximum(0.0, qmin - q) + np.maximum(0.0, q - qmax)),
        "branch": np.where(rating > 0, over, 0.0),
    }


def max_mismatch(case: NetworkCase, scenario: LoadScenario, state: IvState) -> float:
    """Largest violation of any constraint (pu)."""
    return float(max(np.max(v, initial=0.0) for v in violations(case, scenario, state).values()))


def state_cost(case: NetworkCase, state: IvState) -> float:
    return float(generation_cost(case, state.p_mw))


def merit(case: NetworkCase, scenario: LoadScenario, state: IvState, penalty: float = PENALTY) -> float:
    """Generation cost plus ``penalty`` times the summed violation."""
    total = sum(float(np.sum(v)) for v in violations(case, scenario, state).values())
    return state_cost(case, state) + penalty * total


# ---------------------------------------------------------------------------
# linearization

@dataclass(frozen=True)
class IvLayout:
    """Column positions of the LP built by :func:`linearize_iv`."""

    n_bus: int
    n_gen: int
    n_slack: int

    @property
    def de(self) -> slice:
        return slice(0, self.n_bus)

    @property
    def df(self) -> slice:
        return slice(self.n_bus, 2 * self.n_bus)

    @property
    def dir(self) -> slice:
        return slice(2 * self.n_bus, 3 * self.n_bus)

    @property
    def dii(self) -> slice:
        return slice(3 * self.n_bus, 4 * self.n_bus)

    @property
    def dp(self) -> slice:
        return slice(4 * self.n_bus, 4 * self.n_bus + self.n_gen)

    @property
    def dq(self) -> slice:
        s = 4 * self.n_bus + self.n_gen
        return slice(s, s + self.n_gen)

    @property
    def slacks(self) -> slice:
        s = 4 * self.n_bus + 2 * self.n_gen
        return slice(s, s + self.n_slack)


def octagon_normals(phase: float) -> np.ndarray:
    """Unit outward normals (8, 2) of a regular octagon with one facet
    normal pointing along ``phase``."""
    ang = phase + np.arange(OCTAGON_FACETS) * (2 * math.pi / OCTAGON_FACETS)
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def _limited_ends(case: NetworkCase):
    Yf, Yt = branch_admittances(case)
    fi, ti = _end_indices(case)
    for k, br in enumerate(case.branches):
        if br.limited:
            yield k, "f", Yf[k], fi[k], br.rating_mva
            yield k, "t", Yt[k], ti[k], br.rating_mva


def linearize_iv(case: NetworkCase, scenario: LoadScenario, state: IvState, radius: float,
                 penalty: float = PENALTY) -> tuple[LpProblem, IvLayout]:
    """Build the trust-region LP around ``state``.

    Columns are ``[de, df, dIr, dIi, dP, dQ, slacks]`` (generator changes in
    pu). Each balance row has an elastic pair; each voltage row and each
    limited branch end has one elastic column shared by its facets.
    """
    if radius <= 0:
        raise ValueError("trust radius must be positive")
    n, ng = case.n_bus, len(case.generators)
    base = case.base_mva
    Y = build_ybus(case)
    G, B = Y.real, Y.imag
    C = _gen_incidence(case)
    e0, f0, ir0, ii0 = state.e, state.f, state.ir, state.ii
    vm0 = np.hypot(e0, f0)
    ends = list(_limited_ends(case))
    n_slack = 4 * n + 2 * n + len(ends)
    lay = IvLayout(n, ng, n_slack)
    nv = 4 * n + 2 * ng + n_slack
    sl0 = lay.slacks.start

    rows, senses, rhs, names = [], [], [], []

    def add(row, sense, value, name):
        rows.append(row)
        senses.append(sense)
        rhs.append(value)
        names.append(name)

    # I = Y V, kept exactly
    I_gap = Y @ state.voltage - state.current
    for i in range(n):
        row = np.zeros(nv)
        row[lay.dir.start + i] = 1.0
        row[lay.de] -= G[i]
        row[lay.df] += B[i]
        add(row, EQ, I_gap[i].real, f"ir{i + 1}")
        row = np.zeros(nv)
        row[lay.dii.start + i] = 1.0
        row[lay.de] -= B[i]
        row[lay.df] -= G[i]
        add(row, EQ, I_gap[i].imag, f"ii{i + 1}")

    # Taylor rows of the bilinear balances, elastic
    rp, rq = balance_residual(case, scenario, state)
    for i in range(n):
        row = np.zeros(nv)
        row[lay.de.start + i] = ir0[i]
        row[lay.df.start + i] = ii0[i]
        row[lay.dir.start + i] = e0[i]
        row[lay.dii.start + i] = f0[i]
        row[lay.dp] = -C[i]
        row[sl0 + 4 * i] = 1.0
        row[sl0 + 4 * i + 1] = -1.0
        add(row, EQ, -rp[i], f"p{i + 1}")
        row = np.zeros(nv)
        row[lay.de.start + i] = -ii0[i]
        row[lay.df.start + i] = ir0[i]
        row[lay.dir.start + i] = f0[i]
        row[lay.dii.start + i] = -e0[i]
        row[lay.dq] = -C[i]
        row[sl0 + 4 * i + 2] = 1.0
        row[sl0 + 4 * i + 3] = -1.0
        add(row, EQ, -rq[i], f"q{i + 1}")

    # voltage magnitude along the phasor: |V0| + (e0 de + f0 df)/|V0|
    vs0 = sl0 + 4 * n
    for i, bus in enumerate(case.buses):
        row = np.zeros(nv)
        row[lay.de.start + i] = e0[i] / vm0[i]
        row[lay.df.start + i] = f0[i] / vm0[i]
        up = row.copy()
        up[vs0 + 2 * i] = -1.0
        add(up, LE, bus.v_max - vm0[i], f"vmax{i + 1}")
        lo = -row
        lo[vs0 + 2 * i + 1] = -1.0
        add(lo, LE, vm0[i] - bus.v_min, f"vmin{i + 1}")

    # branch limits: |V_end| (n . I) <= rating for each octagon normal n,
    # linearized in both factors; exact along the phasor facet at the state
    bs0 = vs0 + 2 * n
    V0 = state.voltage
    for s, (k, end, a, bus, rating) in enumerate(ends):
        I0 = a @ V0
        phase = math.atan2(I0.imag, I0.real) if abs(I0) > 1e-12 else 0.0
        re_e, re_f = a.real, -a.imag  # d Re(I) / d(e, f)
        im_e, im_f = a.imag, a.real   # d Im(I) / d(e, f)
        for j, (cx, cy) in enumerate(octagon_normals(phase)):
            proj = cx * I0.real + cy * I0.imag
            row = np.zeros(nv)
            row[lay.de] = vm0[bus] * (cx * re_e + cy * im_e)
            row[lay.df] = vm0[bus] * (cx * re_f + cy * im_f)
            row[lay.de.start + bus] += proj * e0[bus] / vm0[bus]
            row[lay.df.start + bus] += proj * f0[bus] / vm0[bus]
            row[bs0 + s] = -1.0
            add(row, LE, rating / base - vm0[bus] * proj, f"br{k + 1}{end}_facet{j + 1}")

    c = np.zeros(nv)
    p0 = state.p_mw
    c[lay.dp] = [(g.cost_c1 + 2.0 * g.cost_c2 * p) * base for g, p in zip(case.generators, p0)]
    c[lay.slacks] = penalty

    lower = np.full(nv, -np.inf)
    upper = np.full(nv, np.inf)
    lower[lay.de] = -radius
    upper[lay.de] = radius
    lower[lay.df] = -radius
    upper[lay.df] = radius
    slack = case.bus_index(case.slack_bus.id)
    lower[lay.df.start + slack] = upper[lay.df.start + slack] = -f0[slack]
    # the box pulls an out-of-limit state back in one step; the elastic
    # balance rows keep the LP feasible regardless
    for g, gen in enumerate(case.generators):
        lower[lay.dp.start + g] = (gen.p_min - p0[g]) / base
        upper[lay.dp.start + g] = (gen.p_max - p0[g]) / base
        lower[lay.dq.start + g] = (gen.q_min - state.q_mvar[g]) / base
        upper[lay.dq.start + g] = (gen.q_max - state.q_mvar[g]) / base
    lower[lay.slacks] = 0.0

    var_names = ([f"de{i + 1}" for i in range(n)] + [f"df{i + 1}" for i in range(n)]
                 + [f"dir{i + 1}" for i in range(n)] + [f"dii{i + 1}" for i in range(n)]
                 + [f"dp{g + 1}" for g in range(ng)] + [f"dq{g + 1}" for g in range(ng)]
                 + [f"s{j + 1}" for j in range(n_slack)])
    prob = LpProblem(c, np.array(rows), senses, np.array(rhs), lower, upper,
                     var_names=var_names, row_names=names)
    return prob, lay


def zero_step_objective(problem: LpProblem, layout: IvLayout) -> float:
    """LP objective at the zero step with the cheapest feasible elastics,
    i.e. the linear model's value at the current state.

    Generator columns are held at zero even if the state lies outside its
    limits; the value is then a lower bound of the model at the state."""
    x = np.zeros(problem.n_vars)
    sl = layout.slacks
    A = problem.A
    # each elastic column appears in rows that are otherwise satisfied or
    # violated by the constant term; size it to the largest requirement
    need = np.zeros(layout.n_slack)
    for i, sense in enumerate(problem.senses):
        coef = A[i, sl]
        nz = np.flatnonzero(coef)
        if nz.size == 0:
            continue
        if sense == EQ:
            # elastic pair: pick the column whose sign absorbs the rhs
            for j in nz:
                if np.sign(coef[j]) == np.sign(problem.b[i]):
                    need[j] = max(need[j], abs(problem.b[i]))
        else:
            j = nz[0]
            need[j] = max(need[j], max(0.0, -problem.b[i]))
    x[sl] = need
    return float(problem.c @ x)


def step_of(solution: LpSolution, layout: IvLayout, base_mva: float) -> tuple[np.ndarray, ...]:
    x = solution.x
    return (x[layout.de], x[layout.df], x[layout.dir], x[layout.dii],
            x[layout.dp] * base_mva, x[layout.dq] * base_mva)


def apply_step(state: IvState, step: tuple[np.ndarray, ...]) -> IvState:
    de, df, dir_, dii, dp, dq = step
    return IvState(state.e + de, state.f + df, state.ir + dir_, state.ii + dii,
                   state.p_mw + dp, state.q_mvar + dq)


# ---------------------------------------------------------------------------
# solver

def row_functions(case: NetworkCase, scenario: LoadScenario, state: IvState,
                  anchor: IvState) -> np.ndarray:
    """Nonlinear functions whose first-order expansion at ``anchor`` gives the
    non-elastic part of each row of ``linearize_iv(.., anchor, ..)``.

    Row ``i`` of that LP reads ``A_i d (sense) b_i``, and
    ``row_functions(anchor + d) - row_functions(anchor) = A_i d + O(|d|^2)``.
    """
    V = state.voltage
    I_gap = state.current - build_ybus(case) @ V
    rp, rq = balance_residual(case, scenario, state)
    vm = np.hypot(state.e, state.f)
    out = []
    for i in range(case.n_bus):
        out += [I_gap[i].real, I_gap[i].imag]
    for i in range(case.n_bus):
        out += [rp[i], rq[i]]
    for i in range(case.n_bus):
        out += [vm[i], -vm[i]]
    Va = anchor.voltage
    for _, _, a, bus, _ in _limited_ends(case):
        I0 = a @ Va
        phase = math.atan2(I0.imag, I0.real) if abs(I0) > 1e-12 else 0.0
        I = a @ V
        for cx, cy in octagon_normals(phase):
            out.append(vm[bus] * (cx * I.real + cy * I.imag))
    return np.array(out)


def _second_order_correction(case, scenario, state, trial, prob, lay, opt):
    """Re-solve the LP at ``state`` with each row shifted by the second-order
    remainder observed at the rejected ``trial``.

    Along curved limits and bilinear balances the linear step leaves an
    O(|d|^2) violation that the penalty prices above the first-order gain;
    the corrected step removes it to first order.
    """
    x = np.concatenate([trial.e - state.e, trial.f - state.f, trial.ir - state.ir,
                        trial.ii - state.ii, (trial.p_mw - state.p_mw) / case.base_mva,
                        (trial.q_mvar - state.q_mvar) / case.base_mva])
    core = prob.A[:, :lay.slacks.start]
    rem = (row_functions(case, scenario, trial, state) - row_functions(case, scenario, state, state)
           - core @ x)
    shifted = LpProblem(prob.c, prob.A, prob.senses, prob.b - rem, prob.lower, prob.upper,
                        var_names=prob.var_names, row_names=prob.row_names)
    sol = solve_lp(shifted)
    if not sol.optimal:
        return trial, math.inf
    fixed = apply_step(state, step_of(sol, lay, case.base_mva))
    if not fixed.in_sanity_band():
        return trial, math.inf
    return fixed, merit(case, scenario, fixed, opt.penalty)


def _stationary(case, scenario, state, radius, net_gain, opt) -> bool:
    if net_gain < opt.criticality_tolerance * radius:
        return True
    limit = opt.relative_gain_tolerance * max(1.0, abs(state_cost(case, state)))
    if radius != opt.trust_radius_initial:
        prob, _ = linearize_iv(case, scenario, state, opt.trust_radius_initial, opt.penalty)
        sol = solve_lp(prob)
        if not sol.optimal:
            return False
        net_gain = -float(sol.objective)
    return net_gain < limit


def slp_solve(case: NetworkCase, scenario: LoadScenario, init: IvState,
              options: SlpOptions | None = None) -> SlpResult:
    """Trust-region SLP from ``init``.

    Converged means the state violates no constraint by more than
    ``mismatch_tolerance`` and either the last accepted step was shorter than
    ``step_tolerance`` (infinity norm over ``e, f``) or the LP predicts less
    than ``criticality_tolerance * radius`` merit decrease (or, within
    ``trust_radius_initial``, less than ``relative_gain_tolerance`` times the
    cost), in which case the
    step is not taken and recorded with norm zero. A step that realizes less
    than three quarters of the predicted decrease is also tried with a
    second-order correction and the better of the two is kept. The radius
    grows after a boundary step that realizes most of its prediction and
    shrinks after a rejection or a poor one.
    """
    opt = options or SlpOptions()
    state = init
    cur = merit(case, scenario, state, opt.penalty)
    if not math.isfinite(cur):
        raise ValueError("initial state has non-finite merit")
    radius = opt.trust_radius_initial
    trace: list[TraceRow] = []
    converged, message = False, "iteration limit reached"
    it = 0
    for it in range(1, opt.max_iterations + 1):
        mis = max_mismatch(case, scenario, state)
        prob, lay = linearize_iv(case, scenario, state, radius, opt.penalty)
        sol = solve_lp(prob)
        if not sol.optimal:
            trace.append(TraceRow(it, radius, math.nan, state_cost(case, state), mis, False, cur))
            radius *= opt.shrink
            if radius < MIN_RADIUS:
                message = "trust radius collapsed"
                break
            continue
        predicted = zero_step_objective(prob, lay) - sol.objective
        # cost decrease the LP can reach net of any elastic use; the removal
        # of an already tolerable residual does not count as progress
        net_gain = -float(sol.objective)
        if mis < opt.mismatch_tolerance and _stationary(case, scenario, state, radius, net_gain, opt):
            trace.append(TraceRow(it, radius, 0.0, state_cost(case, state), mis, False, cur))
            converged, message = True, "stationary"
            break
        step = step_of(sol, lay, case.base_mva)
        step_norm = float(max(np.max(np.abs(step[0])), np.max(np.abs(step[1]))))
        trial = apply_step(state, step)
        new = merit(case, scenario, trial, opt.penalty) if trial.in_sanity_band() else math.inf
        if math.isfinite(new) and not cur - new >= 0.75 * predicted:
            fixed, fixed_merit = _second_order_correction(case, scenario, state, trial, prob, lay, opt)
            if fixed_merit < new:
                trial, new = fixed, fixed_merit
                step_norm = float(np.max(np.abs(np.concatenate([trial.e - state.e,
                                                                trial.f - state.f]))))
        if new < cur:
            ratio = (cur - new) / predicted if predicted > 0 else 1.0
            state, cur = trial, new
            mis = max_mismatch(case, scenario, state)
            trace.append(TraceRow(it, radius, step_norm, state_cost(case, state), mis, True, cur))
            if step_norm < opt.step_tolerance and mis < opt.mismatch_tolerance:
                converged, message = True, "step below tolerance"
                break
            if ratio >= 0.75 and step_norm >= 0.99 * radius:
                radius = min(radius * opt.expand, MAX_RADIUS)
            elif ratio < 0.25:
                radius *= opt.shrink
        else:
            trace.append(TraceRow(it, radius, step_norm, state_cost(case, state), mis, False, cur))
            radius *= opt.shrink
            if radius < MIN_RADIUS:
                message = "trust radius collapsed"
                break
    return SlpResult(state, state_cost(case, state), it, converged, trace, message)


# ---------------------------------------------------------------------------
# trace export

TRACE_COLUMNS = ("iteration", "radius", "step_norm", "objective", "mismatch", "merit", "accepted")


def trace_csv(result: SlpResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for row in result.trace:
        w.writerow([row.iteration] + [repr(float(getattr(row, c))) for c in TRACE_COLUMNS[1:-1]]
                   + [int(row.accepted)])
    return buf.getvalue()


def save_trace(result: SlpResult, path: str | Path) -> None:
    Path(path).write_text(trace_csv(result), encoding="utf-8")
