import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridstart.network import (PQ, PV, SLACK, Branch, Bus, CaseError, Generator, NetworkCase, build_ybus,
                               check_case, dumps_case, load_case, loads_case, save_case, three_bus_case,
                               validate_case)


def test_non_congested_branch_unlimited():
    case = three_bus_case("non_congested")
    assert case.branch(1, 3).rating_mva == 0
    assert all(not br.limited for br in case.branches)


def test_congested_rating_and_impedance():
    case = three_bus_case("congested")
    assert case.branch(1, 3).rating_mva == 160
    br = case.branch(2, 3)
    assert (br.r, br.x) == (0.006, 0.018)


def test_unknown_variant_rejected():
    with pytest.raises(ValueError):
        three_bus_case("base")


def test_bus_roles():
    case = three_bus_case()
    assert [b.kind for b in case.buses] == [SLACK, PV, PQ]
    assert [g.bus for g in case.generators] == [1, 2]


@pytest.mark.parametrize("a,b,expected", [
    (1, 2, -(12.5 - 37.5j)),
    (2, 3, -(50 / 3 - 50j)),
    (1, 3, -1 / (0.002 + 0.060j)),
])
def test_ybus_off_diagonal(a, b, expected):
    Y = build_ybus(three_bus_case())
    assert abs(Y[a - 1, b - 1] - expected) < 1e-9
    assert abs(Y[b - 1, a - 1] - expected) < 1e-9


def test_ybus_inverse_identity():
    # y12 * Z12 = 1
    Y = build_ybus(three_bus_case())
    assert abs(-Y[0, 1] * (0.008 + 0.024j) - 1) < 1e-12


def test_single_branch_charging_pattern():
    buses = (Bus(1, SLACK), Bus(2, PQ))
    case = NetworkCase(100.0, buses, (Branch(1, 2, 0.01, 0.1, b_charging=0.2),),
                       (Generator(1, 0, 100, -50, 50),))
    Y = build_ybus(case)
    np.testing.assert_allclose(Y.sum(axis=1), [0.1j, 0.1j], atol=1e-12)


@st.composite
def random_cases(draw):
    n = draw(st.integers(2, 6))
    buses = [Bus(1, SLACK)] + [Bus(i, PQ) for i in range(2, n + 1)]
    branches = []
    for i in range(2, n + 1):
        # spanning tree plus optional extra lines, parallels allowed
        j = draw(st.integers(1, i - 1))
        branches.append(Branch(j, i, draw(st.floats(0, 0.1)), draw(st.floats(0.01, 0.5))))
    for _ in range(draw(st.integers(0, 3))):
        a, b = draw(st.integers(1, n)), draw(st.integers(1, n))
        if a != b:
            branches.append(Branch(a, b, draw(st.floats(0, 0.1)), draw(st.floats(0.01, 0.5))))
    return NetworkCase(100.0, tuple(buses), tuple(branches), (Generator(1, 0, 100, -50, 50),))


@given(random_cases())
def test_ybus_symmetric(case):
    Y = build_ybus(case)
    np.testing.assert_allclose(Y, Y.T, atol=1e-12)


@given(random_cases())
def test_ybus_rows_sum_to_zero_without_shunts(case):
    Y = build_ybus(case)
    assert np.max(np.abs(Y.sum(axis=1))) < 1e-12 * max(1.0, np.max(np.abs(Y)))


@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_per_unit_round_trip(mw):
    case = three_bus_case()
    assert abs(case.to_mw(case.to_pu(mw)) - mw) <= 1e-12 * max(1.0, abs(mw))


@pytest.mark.parametrize("variant", ["non_congested", "congested"])
def test_case_round_trip(tmp_path, variant):
    case = three_bus_case(variant)
    path = tmp_path / "case.txt"
    save_case(case, path)
    loaded = load_case(path)
    assert loaded == case
    assert dumps_case(loaded) == path.read_text()


def test_benchmark_cases_valid():
    assert validate_case(three_bus_case("non_congested")) == []
    assert validate_case(three_bus_case("congested")) == []


def test_two_slack_buses_one_violation():
    case = three_bus_case()
    bad = NetworkCase(case.base_mva, (case.buses[0], Bus(2, SLACK), case.buses[2]), case.branches, case.generators)
    assert len(validate_case(bad)) == 1


def test_generator_limits_inverted():
    case = three_bus_case()
    g = case.generators[1]
    bad = NetworkCase(case.base_mva, case.buses, case.branches,
                      (case.generators[0], Generator(g.bus, 10, 5, g.q_min, g.q_max, 0, 1.3, 0)))
    assert len(validate_case(bad)) == 1


def test_missing_slack_rejected_on_load():
    text = dumps_case(three_bus_case()).replace(",slack,", ",pv,")
    with pytest.raises(CaseError, match="no slack bus"):
        loads_case(text)


def test_unknown_branch_bus_named():
    case = three_bus_case()
    bad = NetworkCase(case.base_mva, case.buses, case.branches + (Branch(1, 9, 0.01, 0.1),), case.generators)
    msgs = validate_case(bad)
    assert msgs and any("9" in m and "branch" in m.lower() for m in msgs)
    with pytest.raises(CaseError):
        check_case(bad)


def test_parse_error_reports_line():
    lines = dumps_case(three_bus_case()).splitlines()
    k = lines.index("[branches]") + 1
    lines[k] = lines[k].replace("0.008", "zero-point-eight")
    with pytest.raises(CaseError, match=f"line {k + 1}"):
        loads_case("\n".join(lines))


def test_zero_impedance_rejected():
    case = three_bus_case()
    bad = NetworkCase(case.base_mva, case.buses, (Branch(1, 2, 0.0, 0.0),) + case.branches[1:], case.generators)
    assert validate_case(bad)
