"""Experiment pipelines behind the command line: accuracy, cost comparison and SLP warm starts."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .dcopf import dcopf_setpoint, solve_dcopf
from .ml.data import Dataset
from .ml.metrics import r2_score
from .ml.models import RegressorModel
from .ml.search import GridSearchResult, tune_and_fit
from .network import NetworkCase
from .powerflow import (DispatchSetpoint, LoadScenario, PowerFlowSolution, dispatch_cost,
                        slack_change, solve_power_flow, thermal_violation)
from .scenarios import acopf_oracle, worker_count
from .slp import flat_start, slp_solve, state_from_power_flow

V_CLIP = (0.5, 1.5)
INITIALIZATIONS = ("flat", "dcopf", "ml", "oracle")


def ordered_map(fn: Callable, items: Sequence) -> list:
    """Map over scenarios with up to ``GRIDSTART_THREADS`` workers; results keep input order."""
    workers = worker_count()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# pipelines

@dataclass(frozen=True)
class PipelineOutcome:
    """Result of running a power flow on a proposed setpoint.

    ``cost`` is $/h at the power-flow generator outputs; ``violation`` the
    summed branch overload in MVA. All three metrics are NaN when the power
    flow fails.
    """

    setpoint: DispatchSetpoint
    pf: PowerFlowSolution | None
    cost: float
    slack_change: float
    violation: float

    @property
    def converged(self) -> bool:
        return self.pf is not None and self.pf.converged


def ml_setpoint(case: NetworkCase, model: RegressorModel, scenario: LoadScenario) -> DispatchSetpoint:
    """Turn predicted (V1, V2, Pg1, Pg2) into a schedule clipped to the generator boxes."""
    pred = model.predict_one([scenario.p3l, scenario.q3l])
    gens = case.generators
    v = tuple(float(np.clip(pred[f"v{g.bus}_pu"], *V_CLIP)) for g in gens)
    p = tuple(float(np.clip(pred[f"pg{k + 1}_mw"], g.p_min, g.p_max)) for k, g in enumerate(gens))
    return DispatchSetpoint(p, v)


def run_pipeline(case: NetworkCase, setpoint: DispatchSetpoint, scenario: LoadScenario) -> PipelineOutcome:
    pf = solve_power_flow(case, setpoint, scenario)
    if not pf.converged:
        return PipelineOutcome(setpoint, pf, math.nan, math.nan, math.nan)
    intended = setpoint.p_mw[case.slack_generator]
    return PipelineOutcome(setpoint, pf, dispatch_cost(case, pf), slack_change(pf, intended),
                           float(np.sum(thermal_violation(pf, case))))


def ml_pipeline(case: NetworkCase, model: RegressorModel, scenario: LoadScenario) -> PipelineOutcome:
    return run_pipeline(case, ml_setpoint(case, model, scenario), scenario)


def dcopf_pipeline(case: NetworkCase, scenario: LoadScenario) -> PipelineOutcome:
    dc = solve_dcopf(case, scenario)
    if not dc.optimal:
        sp = DispatchSetpoint(tuple(0.0 for _ in case.generators), tuple(1.0 for _ in case.generators))
        return PipelineOutcome(sp, None, math.nan, math.nan, math.nan)
    return run_pipeline(case, dcopf_setpoint(case, dc), scenario)


# ---------------------------------------------------------------------------
# row types

@dataclass(frozen=True)
class ComparisonRow:
    scenario_id: int
    p3l_mw: float
    q3l_mvar: float
    oracle_cost: float
    ml_cost: float
    ml_slack_change: float
    ml_violation: float
    dc_cost: float
    dc_slack_change: float
    dc_violation: float


@dataclass(frozen=True)
class AccuracyRow:
    family: str
    target: str
    score: float


@dataclass(frozen=True)
class WarmStartRow:
    scenario_id: int
    p3l_mw: float
    q3l_mvar: float
    flat_iterations: int
    flat_objective: float
    flat_converged: bool
    dcopf_iterations: int
    dcopf_objective: float
    dcopf_converged: bool
    ml_iterations: int
    ml_objective: float
    ml_converged: bool
    oracle_iterations: int
    oracle_objective: float
    oracle_converged: bool

    def iterations(self, init: str) -> int:
        return getattr(self, f"{init}_iterations")

    def objective(self, init: str) -> float:
        return getattr(self, f"{init}_objective")

    def converged(self, init: str) -> bool:
        return getattr(self, f"{init}_converged")


# ---------------------------------------------------------------------------
# experiments

def compare(case: NetworkCase, model: RegressorModel, scenarios: Sequence[LoadScenario]) -> list[ComparisonRow]:
    def one(item):
        i, sc = item
        oracle = acopf_oracle(case, sc)
        ml = ml_pipeline(case, model, sc)
        dc = dcopf_pipeline(case, sc)
        return ComparisonRow(i, sc.p3l, sc.q3l, oracle.objective, ml.cost, ml.slack_change, ml.violation,
                             dc.cost, dc.slack_change, dc.violation)

    return ordered_map(one, list(enumerate(scenarios, start=1)))


def accuracy(train: Dataset, test: Dataset, families: Iterable[str], folds: int = 5, seed: int = 0,
             grids: dict | None = None) -> tuple[list[AccuracyRow], dict[str, dict[str, GridSearchResult]]]:
    """Tune each family on ``train`` and score every target on ``test``.

    A target that is constant in ``test`` has no defined score and is
    reported as NaN.
    """
    rows, searches = [], {}
    for fam in families:
        model, searches[fam] = tune_and_fit(fam, train, None if grids is None else grids.get(fam), folds, seed)
        pred = model.predict(test.X)
        for k, name in enumerate(test.target_names):
            try:
                score = r2_score(test.Y[:, k], pred[:, k])
            except ValueError:
                score = math.nan
            rows.append(AccuracyRow(fam, name, score))
    return rows, searches


def _slp_from(case, scenario, pf: PowerFlowSolution | None):
    if pf is None or not pf.converged:
        return 0, math.nan, False
    res = slp_solve(case, scenario, state_from_power_flow(pf, case))
    return res.iterations, res.objective, res.converged


def warm_start(case: NetworkCase, model: RegressorModel, scenarios: Sequence[LoadScenario]) -> list[WarmStartRow]:
    """SLP iterations and objective from each initialization.

    A row records ``converged=False`` and zero iterations when the
    initializing power flow itself fails.
    """
    def one(item):
        i, sc = item
        flat = slp_solve(case, sc, flat_start(case, sc))
        dc = _slp_from(case, sc, dcopf_pipeline(case, sc).pf)
        ml = _slp_from(case, sc, ml_pipeline(case, model, sc).pf)
        oracle = acopf_oracle(case, sc, crosscheck=False)
        orc = _slp_from(case, sc, oracle.pf if oracle.feasible else None)
        return WarmStartRow(i, sc.p3l, sc.q3l, flat.iterations, flat.objective, flat.converged,
                            *dc, *ml, *orc)

    return ordered_map(one, list(enumerate(scenarios, start=1)))


def median_iterations(rows: Sequence[WarmStartRow], init: str) -> float:
    its = [r.iterations(init) for r in rows if r.converged(init)]
    return float(np.median(its)) if its else math.nan


def comparison_summary(rows: Sequence[ComparisonRow]) -> dict[str, float]:
    cols = [f.name for f in fields(ComparisonRow)][3:]
    return {c: float(np.nanmean([getattr(r, c) for r in rows])) for c in cols}


# ---------------------------------------------------------------------------
# CSV and text rendering

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else "%.17g" % v
    return str(v)


def _parse(text: str, kind):
    if kind is bool or kind == "bool":
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r}")
        return text == "true"
    if kind is int or kind == "int":
        return int(text)
    if kind is float or kind == "float":
        return float(text)
    return text


def rows_to_csv(rows: Sequence, row_type) -> str:
    names = [f.name for f in fields(row_type)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for r in rows:
        w.writerow([_fmt(getattr(r, n)) for n in names])
    return buf.getvalue()


def rows_from_csv(text: str, row_type) -> list:
    fs = fields(row_type)
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != [f.name for f in fs]:
        raise ValueError(f"header does not match {row_type.__name__}")
    out = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(fs):
            raise ValueError(f"line {lineno}: expected {len(fs)} fields, got {len(rec)}")
        out.append(row_type(*(_parse(v, f.type) for v, f in zip(rec, fs))))
    return out


def write_rows(rows: Sequence, row_type, path: str | Path) -> None:
    Path(path).write_text(rows_to_csv(rows, row_type), encoding="utf-8")


def read_rows(path: str | Path, row_type) -> list:
    return rows_from_csv(Path(path).read_text(encoding="utf-8"), row_type)


def render_table(header: Sequence[str], body: Sequence[Sequence], digits: int = 3) -> str:
    """Right-aligned plain-text table."""
    def cell(v):
        if isinstance(v, bool):
            return "yes" if v else "no"
        if isinstance(v, float):
            return "nan" if math.isnan(v) else f"{v:.{digits}f}"
        return str(v)

    cells = [list(map(str, header))] + [[cell(v) for v in row] for row in body]
    widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def accuracy_table(rows: Sequence[AccuracyRow]) -> str:
    """Families down, targets across; a missing pair shows as nan."""
    targets = list(dict.fromkeys(r.target for r in rows))
    fams = list(dict.fromkeys(r.family for r in rows))
    score = {(r.family, r.target): r.score for r in rows}
    return render_table(["family"] + targets, [[f] + [score.get((f, t), math.nan) for t in targets] for f in fams], digits=4)


def table_of(rows: Sequence, row_type) -> str:
    names = [f.name for f in fields(row_type)]
    return render_table(names, [[asdict(r)[n] for n in names] for r in rows])
