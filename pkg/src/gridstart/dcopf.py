"""Lossless B-theta DC optimal power flow."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import EQ, GE, LE, LpProblem, LpSolution, solve_lp
from .network import NetworkCase
from .powerflow import DispatchSetpoint, LoadScenario

PWL_SEGMENTS = 10


@dataclass(frozen=True)
class DcopfResult:
    status: str
    gen_p: np.ndarray  # MW
    angles: np.ndarray  # rad
    flows: np.ndarray  # MW, from -> to
    objective: float  # $/h

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass(frozen=True)
class _Layout:
    n_gen: int
    n_bus: int
    segments: dict[int, tuple[int, np.ndarray]]  # gen -> (first var, breakpoints)

    @property
    def theta0(self) -> int:
        return self.n_gen


def _layout(case: NetworkCase) -> _Layout:
    ng, nb = len(case.generators), case.n_bus
    segments = {}
    nxt = ng + nb
    for g, gen in enumerate(case.generators):
        if gen.cost_c2 > 0:
            segments[g] = (nxt, np.linspace(gen.p_min, gen.p_max, PWL_SEGMENTS + 1))
            nxt += PWL_SEGMENTS
    return _Layout(ng, nb, segments)


def build_dcopf(case: NetworkCase, scenario: LoadScenario) -> LpProblem:
    """LP over generator outputs (MW) and bus angles (rad).

    Quadratic costs are replaced by a convex piecewise-linear envelope with
    ``PWL_SEGMENTS`` pieces; ``c0`` terms are left out of the LP objective.
    """
    lay = _layout(case)
    ng, nb = lay.n_gen, lay.n_bus
    nv = ng + nb + PWL_SEGMENTS * len(lay.segments)
    c = np.zeros(nv)
    lower = np.full(nv, -np.inf)
    upper = np.full(nv, np.inf)
    names = [f"pg{g + 1}" for g in range(ng)] + [f"theta{b.id}" for b in case.buses]
    for g, gen in enumerate(case.generators):
        lower[g], upper[g] = gen.p_min, gen.p_max
        if g not in lay.segments:
            c[g] = gen.cost_c1
    slack = case.bus_index(case.slack_bus.id)
    lower[lay.theta0 + slack] = upper[lay.theta0 + slack] = 0.0

    rows, senses, rhs, rnames = [], [], [], []
    for g, (first, bp) in lay.segments.items():
        gen = case.generators[g]
        mids = 0.5 * (bp[:-1] + bp[1:])
        for k in range(PWL_SEGMENTS):
            j = first + k
            c[j] = gen.cost_c1 + 2.0 * gen.cost_c2 * mids[k]
            lower[j], upper[j] = 0.0, bp[k + 1] - bp[k]
            names.append(f"pg{g + 1}_seg{k + 1}")
        row = np.zeros(nv)
        row[g] = 1.0
        row[first:first + PWL_SEGMENTS] = -1.0
        rows.append(row)
        senses.append(EQ)
        rhs.append(gen.p_min)
        rnames.append(f"pwl{g + 1}")

    base = case.base_mva
    for b in case.buses:
        i = case.bus_index(b.id)
        row = np.zeros(nv)
        for g in case.generators_at(b.id):
            row[g] = 1.0
        for br in case.branches:
            bij = base / br.x
            f, t = case.bus_index(br.from_bus), case.bus_index(br.to_bus)
            if i == f:
                row[lay.theta0 + f] -= bij
                row[lay.theta0 + t] += bij
            elif i == t:
                row[lay.theta0 + t] -= bij
                row[lay.theta0 + f] += bij
        rows.append(row)
        senses.append(EQ)
        rhs.append(scenario.p_mw[i])
        rnames.append(f"balance{b.id}")

    for k, br in enumerate(case.branches):
        if not br.limited:
            continue
        row = np.zeros(nv)
        row[lay.theta0 + case.bus_index(br.from_bus)] = base / br.x
        row[lay.theta0 + case.bus_index(br.to_bus)] = -base / br.x
        for sense, lim, tag in ((LE, br.rating_mva, "max"), (GE, -br.rating_mva, "min")):
            rows.append(row)
            senses.append(sense)
            rhs.append(lim)
            rnames.append(f"flow{br.from_bus}_{br.to_bus}_{tag}")

    return LpProblem(c, np.array(rows), senses, np.array(rhs), lower, upper,
                     var_names=names, row_names=rnames)


def _result(case: NetworkCase, sol: LpSolution) -> DcopfResult:
    ng, nb = len(case.generators), case.n_bus
    if not sol.optimal:
        return DcopfResult(sol.status, np.full(ng, np.nan), np.full(nb, np.nan),
                           np.full(len(case.branches), np.nan), np.nan)
    pg = sol.x[:ng].copy()
    theta = sol.x[ng:ng + nb].copy()
    flows = np.array([case.base_mva / br.x * (theta[case.bus_index(br.from_bus)]
                                              - theta[case.bus_index(br.to_bus)])
                      for br in case.branches])
    cost = sum(g.cost_c0 for g in case.generators) + sol.objective
    for g, gen in enumerate(case.generators):
        if gen.cost_c2 > 0:
            # report the exact quadratic cost of the chosen dispatch
            cost += gen.cost(pg[g]) - gen.cost_c0 - _pwl_cost(gen, pg[g])
    return DcopfResult(sol.status, pg, theta, flows, float(cost))


def _pwl_cost(gen, p: float) -> float:
    bp = np.linspace(gen.p_min, gen.p_max, PWL_SEGMENTS + 1)
    mids = 0.5 * (bp[:-1] + bp[1:])
    fill = np.clip(p - bp[:-1], 0.0, bp[1:] - bp[:-1])
    return float(np.sum((gen.cost_c1 + 2.0 * gen.cost_c2 * mids) * fill))


def solve_dcopf(case: NetworkCase, scenario: LoadScenario) -> DcopfResult:
    return _result(case, solve_lp(build_dcopf(case, scenario)))


def dcopf_setpoint(case: NetworkCase, result: DcopfResult, v_pu: float = 1.0) -> DispatchSetpoint:
    """Warm start from a DC dispatch: DC generator outputs, flat voltages."""
    if not result.optimal:
        raise ValueError(f"DCOPF status is {result.status}")
    return DispatchSetpoint(tuple(float(p) for p in result.gen_p), (v_pu,) * len(case.generators))
