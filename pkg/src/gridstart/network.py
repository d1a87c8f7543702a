"""Grid data model, case-file I/O and admittance matrices.

Impedances and admittances are stored in per unit on ``NetworkCase.base_mva``;
generator limits and demands are in MW / MVAr.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SLACK, PV, PQ = "slack", "pv", "pq"
BUS_KINDS = (SLACK, PV, PQ)


class CaseError(ValueError):
    """Raised when a case file cannot be parsed or fails validation."""


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str
    v_min: float = 0.94
    v_max: float = 1.06
    shunt_g: float = 0.0
    shunt_b: float = 0.0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charging: float = 0.0
    rating_mva: float = 0.0  # 0 means unlimited

    @property
    def limited(self) -> bool:
        return self.rating_mva > 0

    @property
    def series_admittance(self) -> complex:
        return 1.0 / complex(self.r, self.x)


@dataclass(frozen=True)
class Generator:
    bus: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    cost_c0: float = 0.0
    cost_c1: float = 0.0
    cost_c2: float = 0.0

    def cost(self, p_mw: float) -> float:
        return self.cost_c0 + self.cost_c1 * p_mw + self.cost_c2 * p_mw * p_mw


@dataclass(frozen=True)
class NetworkCase:
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    name: str = field(default="case", compare=False)

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    def bus_index(self, bus_id: int) -> int:
        """Zero-based position of ``bus_id`` (ids are dense from 1)."""
        return bus_id - 1

    @property
    def slack_bus(self) -> Bus:
        return next(b for b in self.buses if b.kind == SLACK)

    @property
    def slack_generator(self) -> int:
        """Index of the generator that absorbs the power-flow residual."""
        sid = self.slack_bus.id
        return next(i for i, g in enumerate(self.generators) if g.bus == sid)

    def generators_at(self, bus_id: int) -> list[int]:
        return [i for i, g in enumerate(self.generators) if g.bus == bus_id]

    def branch(self, a: int, b: int) -> Branch:
        """First branch joining buses ``a`` and ``b`` in either orientation."""
        for br in self.branches:
            if {br.from_bus, br.to_bus} == {a, b}:
                return br
        raise KeyError(f"no branch between bus {a} and bus {b}")

    def branch_position(self, a: int, b: int) -> int:
        for k, br in enumerate(self.branches):
            if {br.from_bus, br.to_bus} == {a, b}:
                return k
        raise KeyError(f"no branch between bus {a} and bus {b}")

    def with_rating(self, a: int, b: int, rating_mva: float) -> NetworkCase:
        k = self.branch_position(a, b)
        branches = list(self.branches)
        branches[k] = replace(branches[k], rating_mva=rating_mva)
        return replace(self, branches=tuple(branches))

    def to_pu(self, mw: float | np.ndarray) -> float | np.ndarray:
        return mw / self.base_mva

    def to_mw(self, pu: float | np.ndarray) -> float | np.ndarray:
        return pu * self.base_mva


# Benchmark data: Z12, Z23, Z13 from the 3-bus single-line diagram.
THREE_BUS_IMPEDANCES = {
    (1, 2): (0.008, 0.024),
    (2, 3): (0.006, 0.018),
    (1, 3): (0.002, 0.060),
}
CONGESTED_RATING_MVA = 160.0
# The load bus is capped below the generator buses so that the optimal
# generator voltages track the load instead of sitting on their upper bound.
LOAD_BUS_V_MAX = 1.00


def three_bus_case(variant: str = "non_congested") -> NetworkCase:
    """The 3-bus benchmark: slack generator at bus 1, PV generator at bus 2, load at bus 3.

    ``variant`` is ``"non_congested"`` (all ratings unlimited) or
    ``"congested"`` (branch 1-3 limited to 160 MVA).
    """
    if variant not in ("non_congested", "congested"):
        raise ValueError(f"unknown variant {variant!r}")
    buses = (Bus(1, SLACK), Bus(2, PV), Bus(3, PQ, v_max=LOAD_BUS_V_MAX))
    rating13 = CONGESTED_RATING_MVA if variant == "congested" else 0.0
    branches = tuple(
        Branch(a, b, r, x, 0.0, rating13 if (a, b) == (1, 3) else 0.0)
        for (a, b), (r, x) in THREE_BUS_IMPEDANCES.items()
    )
    generators = (
        Generator(1, 0.0, 600.0, -600.0, 600.0, 0.0, 1.0, 0.0),
        Generator(2, 0.0, 600.0, -600.0, 600.0, 0.0, 1.3, 0.0),
    )
    return NetworkCase(100.0, buses, branches, generators, name=f"three_bus_{variant}")


def validate_case(case: NetworkCase) -> list[str]:
    """Return one human-readable description per violated invariant."""
    problems: list[str] = []
    ids = [b.id for b in case.buses]
    if sorted(ids) != list(range(1, len(ids) + 1)) or ids != sorted(ids):
        problems.append(f"bus ids must be unique, ordered and dense from 1, got {ids}")
    known = set(ids)
    if not case.base_mva > 0:
        problems.append(f"base_mva must be positive, got {case.base_mva}")
    n_slack = sum(b.kind == SLACK for b in case.buses)
    if n_slack == 0:
        problems.append("no slack bus")
    elif n_slack > 1:
        problems.append(f"{n_slack} slack buses, expected exactly one")
    for b in case.buses:
        if b.kind not in BUS_KINDS:
            problems.append(f"bus {b.id}: unknown kind {b.kind!r}")
        if b.v_min > b.v_max:
            problems.append(f"bus {b.id}: v_min {b.v_min} > v_max {b.v_max}")
    for k, br in enumerate(case.branches):
        tag = f"branch {k + 1} ({br.from_bus}-{br.to_bus})"
        for end in (br.from_bus, br.to_bus):
            if end not in known:
                problems.append(f"{tag}: unknown bus {end}")
        if br.from_bus == br.to_bus:
            problems.append(f"{tag}: from_bus equals to_bus")
        if br.x == 0:
            problems.append(f"{tag}: zero reactance")
        if br.rating_mva < 0:
            problems.append(f"{tag}: negative rating {br.rating_mva}")
    for k, g in enumerate(case.generators):
        tag = f"generator {k + 1} (bus {g.bus})"
        if g.bus not in known:
            problems.append(f"{tag}: unknown bus {g.bus}")
        if g.p_min > g.p_max:
            problems.append(f"{tag}: p_min {g.p_min} > p_max {g.p_max}")
        if g.q_min > g.q_max:
            problems.append(f"{tag}: q_min {g.q_min} > q_max {g.q_max}")
        if g.cost_c2 < 0:
            problems.append(f"{tag}: negative quadratic cost {g.cost_c2}")
    if n_slack == 1:
        sid = next(b.id for b in case.buses if b.kind == SLACK)
        if not any(g.bus == sid for g in case.generators):
            problems.append(f"no generator on slack bus {sid}")
    return problems


def check_case(case: NetworkCase) -> NetworkCase:
    problems = validate_case(case)
    if problems:
        raise CaseError("; ".join(problems))
    return case


def build_ybus(case: NetworkCase) -> np.ndarray:
    """Dense complex bus admittance matrix in per unit."""
    n = case.n_bus
    Y = np.zeros((n, n), dtype=complex)
    for br in case.branches:
        if br.r == 0 and br.x == 0:
            raise CaseError(f"branch {br.from_bus}-{br.to_bus} has zero impedance")
        i, j = case.bus_index(br.from_bus), case.bus_index(br.to_bus)
        y = br.series_admittance
        ysh = 0.5j * br.b_charging
        Y[i, i] += y + ysh
        Y[j, j] += y + ysh
        Y[i, j] -= y
        Y[j, i] -= y
    for b in case.buses:
        k = case.bus_index(b.id)
        Y[k, k] += complex(b.shunt_g, b.shunt_b)
    return Y


def branch_admittances(case: NetworkCase) -> tuple[np.ndarray, np.ndarray]:
    """Matrices ``Yf``, ``Yt`` so that ``Yf @ V`` is the current entering each
    branch at its from end and ``Yt @ V`` at its to end."""
    m, n = len(case.branches), case.n_bus
    Yf = np.zeros((m, n), dtype=complex)
    Yt = np.zeros((m, n), dtype=complex)
    for k, br in enumerate(case.branches):
        i, j = case.bus_index(br.from_bus), case.bus_index(br.to_bus)
        y = br.series_admittance
        ysh = 0.5j * br.b_charging
        Yf[k, i], Yf[k, j] = y + ysh, -y
        Yt[k, i], Yt[k, j] = -y, y + ysh
    return Yf, Yt


# ---------------------------------------------------------------------------
# case file I/O

_SECTIONS = ("base_mva", "buses", "branches", "generators")


def _fmt(v: float) -> str:
    return repr(float(v))


def dumps_case(case: NetworkCase) -> str:
    lines = [f"# {case.name}", "[base_mva]", _fmt(case.base_mva), "[buses]"]
    lines += [f"{b.id},{b.kind},{_fmt(b.v_min)},{_fmt(b.v_max)},{_fmt(b.shunt_g)},{_fmt(b.shunt_b)}"
              for b in case.buses]
    lines.append("[branches]")
    lines += [f"{br.from_bus},{br.to_bus},{_fmt(br.r)},{_fmt(br.x)},{_fmt(br.b_charging)},{_fmt(br.rating_mva)}"
              for br in case.branches]
    lines.append("[generators]")
    lines += [",".join([str(g.bus)] + [_fmt(v) for v in (g.p_min, g.p_max, g.q_min, g.q_max,
                                                          g.cost_c0, g.cost_c1, g.cost_c2)])
              for g in case.generators]
    return "\n".join(lines) + "\n"


def save_case(case: NetworkCase, path: str | Path) -> None:
    Path(path).write_text(dumps_case(case), encoding="utf-8")


def _parse_record(fields: Sequence[str], kinds: Sequence[type], lineno: int):
    if len(fields) != len(kinds):
        raise CaseError(f"line {lineno}: expected {len(kinds)} fields, got {len(fields)}")
    out = []
    for f, kind in zip(fields, kinds):
        try:
            out.append(kind(f))
        except ValueError:
            raise CaseError(f"line {lineno}: cannot parse {f!r} as {kind.__name__}") from None
    return out


def loads_case(text: str, name: str | None = None) -> NetworkCase:
    """Parse the case format; the name defaults to a leading ``# name`` comment."""
    if name is None:
        first = text.lstrip().splitlines()[0] if text.strip() else ""
        name = first[1:].strip() if first.startswith("#") and first[1:].strip() else "case"
    section = None
    base_mva = None
    buses: list[Bus] = []
    branches: list[Branch] = []
    gens: list[Generator] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise CaseError(f"line {lineno}: unknown section [{section}]")
            continue
        fields = [f.strip() for f in line.split(",")]
        if section is None:
            raise CaseError(f"line {lineno}: record outside of any section")
        if section == "base_mva":
            (base_mva,) = _parse_record(fields, (float,), lineno)
        elif section == "buses":
            buses.append(Bus(*_parse_record(fields, (int, str, float, float, float, float), lineno)))
        elif section == "branches":
            branches.append(Branch(*_parse_record(fields, (int, int, float, float, float, float), lineno)))
        else:
            gens.append(Generator(*_parse_record(fields, (int,) + (float,) * 7, lineno)))
    if base_mva is None:
        raise CaseError("missing [base_mva] section")
    case = NetworkCase(base_mva, tuple(buses), tuple(branches), tuple(gens), name=name)
    return check_case(case)


def load_case(path: str | Path) -> NetworkCase:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return loads_case(text, None if text.lstrip().startswith("#") else path.stem)
