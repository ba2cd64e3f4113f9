import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pidbounds.constraints import (
    AssumptionError,
    DataError,
    ObservedData,
    compile_assumption,
    compile_causal,
    compile_measurement,
    compile_observed,
    compile_probability,
    make_label,
    observed_from_psi,
    parse_label,
)
from pidbounds.solver import solve_bounds
from pidbounds.targets import TargetSpec, build_target

from conftest import iv_network, proxy_network, space_for

HALF = {(0,): 0.5, (1,): 0.5}


def test_probability(iv_space):
    cons = compile_probability(iv_space, explicit_nonnegativity=True)
    assert len(cons) == 17 and cons[0].relation == "="
    assert compile_probability(1)[0].expression.to_dense(1).tolist() == [1.0]


def test_observed_data_rejects_bad_distributions():
    with pytest.raises(DataError, match="not normalized"):
        ObservedData(("A",), ("Y",), HALF, {(0,): [0.5, 0.48], (1,): [0.5, 0.5]})
    with pytest.raises(DataError, match="missing"):
        ObservedData(("A",), ("Y",), HALF, {(0,): [0.5, 0.5]})


def test_observed_rows(iv_space):
    data = ObservedData(("A",), ("Y",), HALF, {(0,): [0.3, 0.7], (1,): [0.6, 0.4]})
    cons = compile_observed(iv_space, data)
    row = next(c for c in cons if c.label == "OBS@A=0#Y=0")
    assert len(row.expression) == 8 and row.rhs == 0.3
    brute = [a for a in range(16) if iv_space.decode(a)[1][iv_space.decode(a)[0][0]] == 0]
    assert list(row.expression.indices) == brute


def test_observed_dimension_mismatch(iv_space):
    data = ObservedData(("A",), ("Y",), HALF, {(0,): [0.3, 0.3, 0.4], (1,): [0.2, 0.4, 0.4]})
    with pytest.raises(DataError, match="dimension mismatch"):
        compile_observed(iv_space, data)


def test_proxy_mode_observed_is_column_sum():
    space = space_for(proxy_network(3))
    data = ObservedData((), ("Y",), None, {(): [0.2, 0.3, 0.5]})
    cons = compile_observed(space, data)
    assert len(cons) == 3
    for y, c in enumerate(cons):
        cells = {(space.decode(a)[0][0], space.decode(a)[1][0]) for a in c.expression.indices}
        assert cells == {(x, y) for x in range(3)}


def test_degenerate_observed_forces_zero(iv_space):
    data = ObservedData(("A",), ("Y",), HALF, {(0,): [1.0, 0.0], (1,): [0.5, 0.5]})
    cons = compile_probability(iv_space) + compile_observed(iv_space, data)
    # P(Y=1 | A=0) is pinned to zero
    row = next(c for c in cons if c.label == "OBS@A=0#Y=1")
    b = solve_bounds(iv_space, cons, row.expression)
    assert b.lower == pytest.approx(0, abs=1e-12) and b.upper == pytest.approx(0, abs=1e-12)


def test_a0_threshold_two():
    space = space_for(proxy_network(6))
    (c,) = compile_measurement(space, "A0", {"threshold": 2, "epsilon": 0.01})
    cells = {(space.decode(a)[0][0], space.decode(a)[1][0]) for a in c.expression.indices}
    assert cells == {(x, y) for x in range(6) for y in range(6) if abs(x - y) > 2}
    assert c.relation == "<=" and c.rhs == 0.01


def test_a1_binary():
    space = space_for(proxy_network(2))
    (c,) = compile_measurement(space, "A1")
    cells = {(space.decode(a)[0][0], space.decode(a)[1][0]) for a in c.expression.indices}
    assert cells == {(1, 0)} and c.relation == "=" and c.rhs == 0


def test_a2_pair_is_two_inequalities():
    space = space_for(proxy_network(6))
    cons = compile_measurement(space, "A2", {"lambda": 0.0})
    pair = [c for c in cons if "x=2,y=1,y'=3" in c.label]
    assert {c.relation for c in pair} == {"<=", ">="}
    assert all(c.rhs == 0.0 for c in pair)


def test_a3_direction():
    space = space_for(proxy_network(3))
    cons = compile_measurement(space, "A3")
    c = next(c for c in cons if c.label.endswith("x=0,y=0,y'=2"))
    # mass(0,0) - mass(0,2) >= 0
    d = c.expression.as_dict()
    plus = {(space.decode(a)[0][0], space.decode(a)[1][0]) for a, v in d.items() if v > 0}
    assert plus == {(0, 0)} and c.relation == ">="


def test_negative_params_rejected():
    space = space_for(proxy_network(2))
    with pytest.raises(AssumptionError):
        compile_measurement(space, "A0", {"epsilon": -0.1})
    with pytest.raises(AssumptionError):
        compile_measurement(space, "A2", {"lambda": -0.1})
    with pytest.raises(AssumptionError, match="unknown assumption kind"):
        compile_assumption(space, {"kind": "A7"})


def test_a4_a5_binary(iv_space):
    (a4,) = compile_causal(iv_space, "A4", "A", "X", data=HALF)
    assert set(a4.expression.indices) == {a for a in range(16) if iv_space.decode(a)[0] == (1, 0)}
    assert a4.relation == "=" and a4.rhs == 0
    (a5,) = compile_causal(iv_space, "A5", "X", "Y")
    assert set(a5.expression.indices) == {a for a in range(16) if iv_space.decode(a)[1] == (1, 0)}


def test_causal_out_of_range(iv_space):
    with pytest.raises(AssumptionError, match="out of range"):
        compile_causal(iv_space, "A4", "A", "X", data=HALF, pairs=[(0, 2)])


def test_slack_one_is_vacuous(iv_space, rng):
    psi = rng.dirichlet(np.ones(16))
    data = observed_from_psi(iv_space, psi, HALF)
    base = compile_probability(iv_space) + compile_observed(iv_space, data)
    obj = build_target(iv_space, data, TargetSpec("ate", "X", intervention="A", t=1, t_prime=0))
    b0 = solve_bounds(iv_space, base, obj)
    b1 = solve_bounds(iv_space, base + compile_causal(iv_space, "A4", "A", "X", 1.0, data=data), obj)
    assert b0.lower == pytest.approx(b1.lower, abs=1e-9) and b0.upper == pytest.approx(b1.upper, abs=1e-9)


def test_a0_zero_forces_x_equal_y():
    space = space_for(proxy_network(4))
    py = [0.1, 0.2, 0.3, 0.4]
    data = ObservedData((), ("Y",), None, {(): py})
    cons = (compile_probability(space) + compile_observed(space, data)
            + compile_measurement(space, "A0", {"threshold": 0, "epsilon": 0.0}))
    b = solve_bounds(space, cons, build_target(space, data, TargetSpec("moment", "X")))
    ey = float(np.dot(range(4), py))
    assert b.lower == pytest.approx(ey, abs=1e-9) and b.upper == pytest.approx(ey, abs=1e-9)


def test_labels_roundtrip_and_unique():
    space = space_for(iv_network(3, 3))
    data = observed_from_psi(space, np.full(space.atom_count, 1 / space.atom_count), HALF)
    cons = []
    for kind in ("A0", "A2", "A3"):
        for level in ("observed", "per-arm-counterfactual"):
            cons += compile_measurement(space, kind, {"epsilon": 0.1, "threshold": 1, "lambda": 0.05},
                                        level, data=data)
    labels = [c.label for c in cons]
    assert len(set(labels)) == len(labels)
    for lab in labels:
        p = parse_label(lab)
        assert make_label(p["kind"], p["params"], p["arm"], p["detail"]) == lab


def test_named_label():
    p = parse_label(make_label("A0", {"epsilon": 0.1}, "obs", None, name="tight"))
    assert p["name"] == "tight" and p["kind"] == "A0" and p["params"] == {"epsilon": "0.1"}


@given(st.floats(0.0, 0.5), st.floats(0.0, 0.5))
@settings(max_examples=15, deadline=None)
def test_epsilon_monotone(e1, e2):
    lo_e, hi_e = sorted((e1, e2))
    space = space_for(proxy_network(3))
    data = ObservedData((), ("Y",), None, {(): [0.2, 0.3, 0.5]})
    base = compile_probability(space) + compile_observed(space, data)
    obj = build_target(space, data, TargetSpec("moment", "X"))
    bounds = [solve_bounds(space, base + compile_measurement(space, "A0", {"threshold": 0, "epsilon": e}), obj)
              for e in (lo_e, hi_e)]
    assert bounds[1].lower <= bounds[0].lower + 1e-9 and bounds[0].upper <= bounds[1].upper + 1e-9
