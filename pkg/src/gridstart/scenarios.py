"""Load sampling, the brute-force ACOPF oracle and training-set assembly.

The oracle searches the benchmark's small decision space directly: the
active power of every non-slack generator and the terminal voltage of every
generator. A coarse exhaustive grid is refined by pattern search with step
halving, then polished by SLSQP on the same power-flow evaluations so that
optima on curved limits are located to high precision. The result can be
cross-checked by the SLP solver.
"""
from __future__ import annotations

import itertools
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .ml.data import Dataset
from .network import NetworkCase
from .powerflow import (BatchPowerFlow, DispatchSetpoint, LoadScenario, PfOptions, PowerFlowSolution,
                        generation_cost, solve_power_flow, solve_power_flow_batch)

log = logging.getLogger(__name__)

DEFAULT_P_RANGE = (0.0, 610.0)
DEFAULT_Q_RANGE = (0.0, 80.0)
FEATURES = ("p3l_mw", "q3l_mvar")
TARGETS = ("v1_pu", "v2_pu", "pg1_mw", "pg2_mw")

GRID_P_STEP = 5.0
GRID_V_STEP = 0.005
FINAL_P_STEP = 0.01
FINAL_V_STEP = 1e-5
FEAS_TOL = 1e-6
MAX_INFEASIBLE_FRACTION = 0.2


class DatasetError(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplingSpec:
    count: int
    p_range: tuple[float, float] = DEFAULT_P_RANGE
    q_range: tuple[float, float] = DEFAULT_Q_RANGE
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be at least 1")
        for lo, hi in (self.p_range, self.q_range):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ValueError(f"invalid range ({lo}, {hi})")


def sample_scenarios(spec: SamplingSpec, bus_id: int = 3, n_bus: int = 3) -> list[LoadScenario]:
    """Independent uniform draws of the demand at ``bus_id``."""
    rng = np.random.default_rng(spec.seed)
    u = rng.random((spec.count, 2))
    p = spec.p_range[0] + (spec.p_range[1] - spec.p_range[0]) * u[:, 0]
    q = spec.q_range[0] + (spec.q_range[1] - spec.q_range[0]) * u[:, 1]
    return [LoadScenario.at_bus(bus_id, pi, qi, n_bus) for pi, qi in zip(p, q)]


# ---------------------------------------------------------------------------
# oracle

@dataclass(frozen=True)
class OracleSolution:
    status: str  # "optimal" or "infeasible"
    setpoint: DispatchSetpoint
    objective: float
    pf: PowerFlowSolution | None
    trace: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


class _Space:
    """Decision vector layout: non-slack generator P (MW), then every
    generator's voltage (pu)."""

    def __init__(self, case: NetworkCase):
        self.case = case
        self.slack = case.slack_generator
        self.p_gens = [g for g in range(len(case.generators)) if g != self.slack]
        ng = len(case.generators)
        self.dim = len(self.p_gens) + ng
        lo, hi, step, final = [], [], [], []
        for g in self.p_gens:
            gen = case.generators[g]
            lo.append(gen.p_min)
            hi.append(gen.p_max)
            step.append(GRID_P_STEP)
            final.append(FINAL_P_STEP)
        for gen in case.generators:
            bus = case.buses[case.bus_index(gen.bus)]
            lo.append(bus.v_min)
            hi.append(bus.v_max)
            step.append(GRID_V_STEP)
            final.append(FINAL_V_STEP)
        self.lo, self.hi = np.array(lo), np.array(hi)
        self.step, self.final = np.array(step), np.array(final)

    def grid_axes(self) -> list[np.ndarray]:
        axes = []
        for lo, hi, st in zip(self.lo, self.hi, self.step):
            n = int(np.floor((hi - lo) / st + 1e-9))
            ax = lo + st * np.arange(n + 1)
            if hi - ax[-1] > 1e-9:
                ax = np.append(ax, hi)
            axes.append(np.round(ax, 10))
        return axes

    def split(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        z = np.atleast_2d(z)
        ng = len(self.case.generators)
        pg = np.zeros((z.shape[0], ng))
        for k, g in enumerate(self.p_gens):
            pg[:, g] = z[:, k]
        return pg, z[:, len(self.p_gens):]

    def setpoint(self, z: np.ndarray, slack_p: float) -> DispatchSetpoint:
        pg, vg = self.split(z)
        p = pg[0].copy()
        p[self.slack] = slack_p
        return DispatchSetpoint(tuple(float(v) for v in p), tuple(float(v) for v in vg[0]))


def constraint_violation(case: NetworkCase, r: BatchPowerFlow) -> np.ndarray:
    """Total limit violation per candidate (pu voltage + MW/MVAr/MVA units);
    infinite for non-converged candidates."""
    vmin = np.array([b.v_min for b in case.buses])
    vmax = np.array([b.v_max for b in case.buses])
    viol = np.sum(np.maximum(0, vmin - r.vm) + np.maximum(0, r.vm - vmax), axis=-1)
    for g, gen in enumerate(case.generators):
        viol = viol + np.maximum(0, gen.p_min - r.gen_p[:, g]) + np.maximum(0, r.gen_p[:, g] - gen.p_max)
        viol = viol + np.maximum(0, gen.q_min - r.gen_q[:, g]) + np.maximum(0, r.gen_q[:, g] - gen.q_max)
    for k, br in enumerate(case.branches):
        if br.limited:
            mva = np.maximum(np.abs(r.s_from[:, k]), np.abs(r.s_to[:, k]))
            viol = viol + np.maximum(0, mva - br.rating_mva)
    return np.where(r.converged, viol, np.inf)


def _evaluate(case, space, z, scenario):
    pg, vg = space.split(z)
    r = solve_power_flow_batch(case, pg, vg, scenario, tolerance=1e-10)
    viol = constraint_violation(case, r)
    cost = generation_cost(case, r.gen_p)
    return cost, viol, r


def _refine(case, space, z, cost, scenario):
    """Compass search over coordinate and pairwise-diagonal directions with
    step halving down to the final resolution."""
    dirs = []
    for i in range(space.dim):
        for s in (1.0, -1.0):
            d = np.zeros(space.dim)
            d[i] = s
            dirs.append(d)
    for i, j in itertools.combinations(range(space.dim), 2):
        for si, sj in itertools.product((1.0, -1.0), repeat=2):
            d = np.zeros(space.dim)
            d[i], d[j] = si, sj
            dirs.append(d)
    dirs = np.array(dirs)
    step = space.step.copy()
    evaluations = 0
    while True:
        cand = np.clip(z + dirs * step, space.lo, space.hi)
        c, v, _ = _evaluate(case, space, cand, scenario)
        evaluations += len(cand)
        c = np.where(v <= FEAS_TOL, c, np.inf)
        k = int(np.argmin(c))
        if c[k] < cost - 1e-12:
            z, cost = cand[k], float(c[k])
            continue
        if np.all(step <= space.final * (1 + 1e-9)):
            break
        step = step / 2
    return z, cost, evaluations


class _SmoothModel:
    """Cost and smooth inequality constraints ``g(z) >= 0`` of the reduced
    problem, with forward-difference Jacobians from one batched power flow.

    Decision variables are scaled to pu; constraint values are in pu.
    """

    STEP = 1e-7

    def __init__(self, case: NetworkCase, space: _Space, scenario: LoadScenario):
        self.case, self.space, self.scenario = case, space, scenario
        base = case.base_mva
        self.scale = np.where(np.arange(space.dim) < len(space.p_gens), base, 1.0)
        self.vmin = np.array([b.v_min for b in case.buses])
        self.vmax = np.array([b.v_max for b in case.buses])
        g = case.generators
        self.pmin = np.array([x.p_min for x in g]) / base
        self.pmax = np.array([x.p_max for x in g]) / base
        self.qmin = np.array([x.q_min for x in g]) / base
        self.qmax = np.array([x.q_max for x in g]) / base
        self.limited = [k for k, br in enumerate(case.branches) if br.limited]
        self.rating = np.array([case.branches[k].rating_mva for k in self.limited]) / base
        self._key, self._vals = None, None

    def _values(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        z = Z * self.scale
        pg, vg = self.space.split(z)
        r = solve_power_flow_batch(self.case, pg, vg, self.scenario, tolerance=1e-12)
        base = self.case.base_mva
        cost = generation_cost(self.case, r.gen_p)
        p, q = r.gen_p / base, r.gen_q / base
        parts = [r.vm - self.vmin, self.vmax - r.vm, p - self.pmin, self.pmax - p,
                 q - self.qmin, self.qmax - q]
        if self.limited:
            parts += [self.rating - np.abs(r.s_from[:, self.limited]) / base,
                      self.rating - np.abs(r.s_to[:, self.limited]) / base]
        g = np.concatenate(parts, axis=1)
        bad = ~r.converged
        cost[bad] = np.inf
        g[bad] = -np.inf
        return cost, g

    def _eval(self, x: np.ndarray):
        key = x.tobytes()
        if key != self._key:
            Z = np.vstack([x, x + self.STEP * np.eye(len(x))])
            cost, g = self._values(Z)
            if not np.all(np.isfinite(cost)):
                raise FloatingPointError("power flow failed during polishing")
            self._key = key
            self._vals = (cost[0], (cost[1:] - cost[0]) / self.STEP,
                          g[0], ((g[1:] - g[0]) / self.STEP).T)
        return self._vals

    def cost(self, x):
        return self._eval(x)[0]

    def cost_grad(self, x):
        return self._eval(x)[1]

    def cons(self, x):
        return self._eval(x)[2]

    def cons_jac(self, x):
        return self._eval(x)[3]


# constraint back-offs (pu) tried in turn when SLSQP stops marginally outside the feasible set
POLISH_MARGINS = (0.0, 1e-7, 1e-6)


def _polish(case, space, z, cost, scenario):
    """SLSQP from the pattern-search point; kept only if the power flow at
    the result is feasible and cheaper."""
    model = _SmoothModel(case, space, scenario)
    x0 = z / model.scale
    bounds = list(zip(space.lo / model.scale, space.hi / model.scale))
    n_iter = 0
    for margin in POLISH_MARGINS:
        try:
            res = minimize(model.cost, x0, jac=model.cost_grad, method="SLSQP", bounds=bounds,
                           constraints=[{"type": "ineq", "fun": lambda x, m=margin: model.cons(x) - m,
                                         "jac": model.cons_jac}],
                           options={"ftol": 1e-12, "maxiter": 200})
        except (FloatingPointError, ValueError):
            return z, cost, n_iter
        n_iter += int(res.nit)
        cand = np.clip(res.x * model.scale, space.lo, space.hi)
        c, v, _ = _evaluate(case, space, cand[None, :], scenario)
        if v[0] <= FEAS_TOL:
            if c[0] < cost:
                return cand, float(c[0]), n_iter
            break
    return z, cost, n_iter


def acopf_oracle(case: NetworkCase, scenario: LoadScenario, crosscheck: bool = True,
                 chunk: int = 100_000) -> OracleSolution:
    """Globally search the benchmark ACOPF for one demand point.

    Stage 1 evaluates every point of a (5 MW, 0.005 pu) grid with the AC
    power flow, stage 2 refines the best feasible point by compass search down
    to (0.01 MW, 1e-5 pu), stage 3 polishes it with SLSQP on the smooth
    constraint functions, and stage 4 (``crosscheck``) runs the SLP solver
    from the result and records whether it finds anything more than 0.1%
    cheaper.
    """
    space = _Space(case)
    axes = space.grid_axes()
    Z = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    best_cost, best_z = np.inf, None
    least_viol, least_z = np.inf, None
    for start in range(0, len(Z), chunk):
        zc = Z[start:start + chunk]
        cost, viol, _ = _evaluate(case, space, zc, scenario)
        feas = viol <= FEAS_TOL
        if np.any(feas):
            k = int(np.argmin(np.where(feas, cost, np.inf)))
            if cost[k] < best_cost:
                best_cost, best_z = float(cost[k]), zc[k]
        k = int(np.argmin(viol))
        if viol[k] < least_viol:
            least_viol, least_z = float(viol[k]), zc[k]
    trace = {"grid_points": len(Z), "grid_best": best_cost}

    if best_z is None:
        _, _, r = _evaluate(case, space, least_z[None, :], scenario)
        sp = space.setpoint(least_z, float(r.gen_p[0, space.slack]))
        pf = solve_power_flow(case, sp, scenario)
        trace["min_violation"] = least_viol
        return OracleSolution("infeasible", sp, np.inf, pf, trace)

    z, cost, n_eval = _refine(case, space, best_z, best_cost, scenario)
    trace.update(refined_best=cost, refine_evaluations=n_eval)
    z, cost, n_iter = _polish(case, space, z, cost, scenario)
    trace.update(polished_best=cost, polish_iterations=n_iter)
    _, _, r = _evaluate(case, space, z[None, :], scenario)
    sp = space.setpoint(z, float(r.gen_p[0, space.slack]))
    pf = solve_power_flow(case, sp, scenario, PfOptions(tolerance=1e-10))
    sol = OracleSolution("optimal", sp, cost, pf, trace)
    if crosscheck:
        _crosscheck(case, scenario, sol)
    return sol


def _crosscheck(case, scenario, sol: OracleSolution) -> None:
    from .slp import slp_solve, state_from_power_flow

    res = slp_solve(case, scenario, state_from_power_flow(sol.pf, case))
    sol.trace["slp_objective"] = res.objective if res.converged else None
    sol.trace["slp_iterations"] = res.iterations
    ok = (not res.converged) or res.objective >= sol.objective * (1 - 1e-3)
    sol.trace["crosscheck_ok"] = ok
    if not ok:
        log.warning("SLP improved the oracle objective %.6f to %.6f", sol.objective, res.objective)


# ---------------------------------------------------------------------------
# dataset assembly

def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("GRIDSTART_THREADS", "1")))
    except ValueError:
        return 1


def solve_scenarios(case: NetworkCase, scenarios: Sequence[LoadScenario],
                    crosscheck: bool = True) -> list[OracleSolution]:
    """Run the oracle on every scenario; results keep the input order."""
    workers = worker_count()
    if workers == 1:
        return [acopf_oracle(case, s, crosscheck) for s in scenarios]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: acopf_oracle(case, s, crosscheck), scenarios))


def dataset_from_solutions(scenarios: Iterable[LoadScenario], solutions: Iterable[OracleSolution],
                           case: NetworkCase) -> tuple[Dataset, int]:
    slack = case.slack_generator
    rows_x, rows_y = [], []
    dropped = 0
    for sc, sol in zip(scenarios, solutions):
        if not sol.feasible:
            dropped += 1
            continue
        p = list(sol.setpoint.p_mw)
        p[slack] = sol.pf.slack_p
        rows_x.append([sc.p3l, sc.q3l])
        rows_y.append(list(sol.setpoint.v_pu) + p)
    X = np.array(rows_x, dtype=float).reshape(-1, 2)
    Y = np.array(rows_y, dtype=float).reshape(-1, len(TARGETS))
    return Dataset(X, Y, FEATURES, TARGETS), dropped


def build_dataset(case: NetworkCase, scenarios: Sequence[LoadScenario],
                  crosscheck: bool = True) -> tuple[Dataset, int]:
    """One row per feasible scenario; returns the dataset and the number of
    scenarios dropped as infeasible.

    Raises
    ------
    DatasetError
        If more than 20% of the scenarios are infeasible.
    """
    if not scenarios:
        raise ValueError("no scenarios given")
    solutions = solve_scenarios(case, scenarios, crosscheck)
    dropped = sum(not s.feasible for s in solutions)
    if dropped > MAX_INFEASIBLE_FRACTION * len(scenarios):
        raise DatasetError(f"{dropped} of {len(scenarios)} scenarios infeasible; "
                           "sampling ranges are probably wrong for this case")
    return dataset_from_solutions(scenarios, solutions, case)
