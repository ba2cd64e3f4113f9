import pytest

from pidbounds.model import (
    NetworkError,
    NetworkSpec,
    NotInFineClassError,
    VariableSpec,
    apply_prop2_reductions,
    check_fine_conditions,
    relax_to_linear,
    validate_network,
)

from conftest import chain_network, iv_network


def V(name, card=2, role="observed"):
    return VariableSpec(name, role, None if role == "exogenous" else card)


def test_iv_graph_is_valid():
    net = validate_network(iv_network())
    assert net.order.index("A") < net.order.index("X") < net.order.index("Y")


def test_self_loop_is_a_cycle():
    net = NetworkSpec([V("X")], [("X", "X")])
    with pytest.raises(NetworkError, match="cycle"):
        validate_network(net)


def test_longer_cycle():
    net = NetworkSpec([V("X"), V("Y"), V("Z")], [("X", "Y"), ("Y", "Z"), ("Z", "X")])
    with pytest.raises(NetworkError, match="cycle"):
        validate_network(net)


def test_exogenous_with_parent_rejected():
    net = NetworkSpec([V("A"), V("L", role="exogenous")], [("A", "L")])
    with pytest.raises(NetworkError, match="exogenous variable .* has parent"):
        validate_network(net)


@pytest.mark.parametrize("variables", [
    [V("X"), V("X")],
    [VariableSpec("X", "observed", 1)],
    [VariableSpec("X", "weird", 2)],
])
def test_bad_variables(variables):
    with pytest.raises(NetworkError):
        validate_network(NetworkSpec(variables, []))


def test_iv_witness():
    w = check_fine_conditions(iv_network())
    assert w.is_fine
    assert (w.lambda_, w.children, w.instruments) == ("L", ("X", "Y"), ("A",))


def test_two_instrument_witness():
    net = NetworkSpec([V("A"), V("B"), V("X"), V("Y"), V("L", role="exogenous")],
                      [("A", "X"), ("B", "Y"), ("X", "Y"), ("L", "X"), ("L", "Y")])
    w = check_fine_conditions(net)
    assert w.children == ("X", "Y") and set(w.instruments) == {"A", "B"}


def test_chain_not_fine():
    rep = check_fine_conditions(chain_network())
    assert not rep.is_fine
    assert "no exogenous" in str(rep)


def test_failure_names_vertex():
    # L's descendant Z is not its child
    net = NetworkSpec([V("X"), V("Z"), V("L", role="exogenous")], [("L", "X"), ("X", "Z")])
    rep = check_fine_conditions(net)
    assert rep.failures[0].vertex == "Z" and rep.failures[0].condition == 1


def _confounded_instrument(with_edge):
    edges = [("U", "A"), ("U", "X"), ("X", "Y"), ("L", "X"), ("L", "Y")]
    if with_edge:
        edges.append(("A", "X"))
    return NetworkSpec([V("A"), V("X", 3, "latent-target"), V("Y", 3), V("U", role="exogenous"),
                        V("L", role="exogenous")], edges)


@pytest.mark.parametrize("with_edge", [True, False])
def test_prop2_reduction_gives_iv_graph(with_edge):
    log = []
    out = apply_prop2_reductions(_confounded_instrument(with_edge), log=log)
    assert set(out.edges) == {("A", "X"), ("X", "Y"), ("L", "X"), ("L", "Y")}
    assert "U" not in out.names
    assert log[0]["edge_added"] is (not with_edge)
    assert apply_prop2_reductions(out) == out  # idempotent


def test_prop2_respects_protected():
    out = apply_prop2_reductions(_confounded_instrument(True), protected={"A"})
    assert "U" in out.names


def test_prop2_preserves_endogenous():
    net = _confounded_instrument(False)
    out = apply_prop2_reductions(net)
    card = lambda s: {v.name: v.cardinality for v in s.variables if not v.is_exogenous}
    assert card(out) == card(net)


def test_relax_chain():
    relaxed, report = relax_to_linear(chain_network())
    assert ("A", "X") in relaxed.edges and ("X", "Y") in relaxed.edges
    lam = report.new_confounder
    assert {(lam, "X"), (lam, "Y")} <= set(relaxed.edges) and (lam, "A") not in relaxed.edges
    assert not report.sharp
    assert check_fine_conditions(relaxed).is_fine


def test_relax_fine_input_unchanged():
    net = validate_network(iv_network())
    relaxed, report = relax_to_linear(net)
    assert relaxed.edges == net.edges and report.sharp


def test_relax_fresh_name_avoids_clash():
    net = NetworkSpec([V("Lambda"), V("X"), V("Y")], [("Lambda", "X"), ("X", "Y")])
    relaxed, report = relax_to_linear(net)
    assert report.new_confounder != "Lambda"


def test_relax_fails_with_vertex():
    # A has two children after relaxation and so cannot be an instrument
    net = NetworkSpec([V("A"), V("X"), V("Y")], [("A", "X"), ("A", "Y"), ("X", "Y")])
    with pytest.raises(NotInFineClassError) as info:
        relax_to_linear(net)
    assert info.value.vertex == "A"


def test_relax_never_drops_endogenous_edges():
    net = NetworkSpec([V("A"), V("X"), V("Y"), V("Z"), V("U", role="exogenous")],
                      [("A", "X"), ("X", "Y"), ("Y", "Z"), ("U", "Y"), ("U", "Z")])
    relaxed, _ = relax_to_linear(net)
    endo = {e for e in net.edges if e[0] != "U"}
    assert endo <= set(relaxed.edges)
