"""YAML model files.

Layout::

    variables:            # list of {name, cardinality, role}
    edges:                # list of [parent, child] or "parent -> child"
    observed:
      instruments: [A]    # optional; inferred from the graph when omitted
      variables: [Y]      # observed children of the confounder, optional
      instrument_marginal: [0.5, 0.5]      # row-major over joint instrument values
      conditionals:       # one table per joint instrument value
        "0": [...]        # key is the comma-joined arm, e.g. "0,1"
        "1": [...]        # table is row-major over the observed variables
    assumptions:          # list of {kind, name, params, level, slack, ...}
    target: {kind, variable, value, order, intervention, t, t_prime}
    sweep:                # optional
      subsets: [[], [A0], [A0, A2]]
      parameter: A0.epsilon
      values: [0.0, 0.05]
    options: {relax: false}

Distributions are checked, never renormalized.
"""

from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np
import yaml

from .constraints import ASSUMPTION_KINDS, DataError, ObservedData
from .model import ROLES, NetworkError, NetworkSpec, NotInFineClassError, VariableSpec, validate_network
from .pipeline import Model, SweepPlan, prepare_network
from .targets import TargetError, TargetSpec

_TOP = ("variables", "edges", "observed", "assumptions", "target", "sweep", "options")


class SpecError(ValueError):
    pass


def _line_map(node, path=(), out=None):
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            _line_map(v, path + (str(k.value),), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (str(i),), out)
    return out


class _Ctx:
    def __init__(self, lines, source):
        self.lines = lines
        self.source = source

    def error(self, path, msg):
        path = tuple(str(p) for p in path)
        line = None
        for k in range(len(path), -1, -1):
            if path[:k] in self.lines:
                line = self.lines[path[:k]]
                break
        where = ".".join(path) or "<root>"
        loc = f" (line {line})" if line else ""
        return SpecError(f"{self.source}: {where}{loc}: {msg}")


def load_spec_text(text: str, source: str = "<string>") -> Model:
    try:
        raw = yaml.safe_load(text)
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise SpecError(f"{source}: invalid YAML: {exc}") from None
    ctx = _Ctx(_line_map(node) if node is not None else {}, source)
    if not isinstance(raw, dict):
        raise ctx.error((), "expected a mapping with sections " + ", ".join(_TOP))
    for key in raw:
        if key not in _TOP:
            raise ctx.error((key,), f"unknown section; expected one of {_TOP}")
    for key in ("variables", "target"):
        if key not in raw:
            raise ctx.error((), f"missing required section {key!r}")

    network = _network(ctx, raw)
    assumptions = _assumptions(ctx, raw.get("assumptions") or [])
    target = _target(ctx, raw["target"])
    options = raw.get("options") or {}
    if not isinstance(options, dict):
        raise ctx.error(("options",), "expected a mapping")
    relax = bool(options.get("relax", False))
    data = _observed(ctx, raw.get("observed"), network, target, relax)
    sweep = _sweep(ctx, raw.get("sweep"), assumptions)
    return Model(network, data, assumptions, target, sweep, relax, source=source)


def parse_spec(path) -> Model:
    path = Path(path)
    if not path.exists():
        raise SpecError(f"{path}: file not found")
    return load_spec_text(path.read_text(), str(path))


# ----------------------------------------------------------------- sections


def _network(ctx, raw):
    vars_raw = raw["variables"]
    if not isinstance(vars_raw, list) or not vars_raw:
        raise ctx.error(("variables",), "expected a non-empty list")
    variables = []
    for i, v in enumerate(vars_raw):
        if not isinstance(v, dict) or "name" not in v:
            raise ctx.error(("variables", i), "each variable needs a name")
        role = v.get("role", "observed")
        if role not in ROLES:
            raise ctx.error(("variables", i, "role"), f"unknown role {role!r}; expected one of {ROLES}")
        card = v.get("cardinality")
        if role != "exogenous" and not isinstance(card, int):
            raise ctx.error(("variables", i, "cardinality"), "endogenous variables need an integer cardinality")
        variables.append(VariableSpec(str(v["name"]), role, card))
    edges = []
    for i, e in enumerate(raw.get("edges") or []):
        if isinstance(e, str) and "->" in e:
            e = [s.strip() for s in e.split("->")]
        if not isinstance(e, (list, tuple)) or len(e) != 2:
            raise ctx.error(("edges", i), "edge must be [parent, child] or 'parent -> child'")
        edges.append((str(e[0]), str(e[1])))
    try:
        return validate_network(NetworkSpec(tuple(variables), tuple(edges)))
    except NetworkError as exc:
        raise ctx.error(("edges",) if edges else ("variables",), str(exc)) from None


def _assumptions(ctx, raw):
    if not isinstance(raw, list):
        raise ctx.error(("assumptions",), "expected a list")
    out, names = [], set()
    for i, a in enumerate(raw):
        if not isinstance(a, dict) or "kind" not in a:
            raise ctx.error(("assumptions", i), "each assumption needs a kind")
        if a["kind"] not in ASSUMPTION_KINDS:
            raise ctx.error(("assumptions", i, "kind"),
                            f"unknown assumption kind {a['kind']!r}; expected one of {ASSUMPTION_KINDS}")
        a = dict(a)
        a.setdefault("name", a["kind"])
        a["name"] = str(a["name"])
        if a["name"] in names:
            raise ctx.error(("assumptions", i, "name"), f"duplicate assumption name {a['name']!r}")
        names.add(a["name"])
        slack = a.get("slack", 0.0)
        if not isinstance(slack, (int, float)) or slack < 0:
            raise ctx.error(("assumptions", i, "slack"), "slack must be a non-negative number")
        if "params" in a and not isinstance(a["params"], dict):
            raise ctx.error(("assumptions", i, "params"), "expected a mapping")
        out.append(a)
    return out


def _target(ctx, raw):
    if not isinstance(raw, dict):
        raise ctx.error(("target",), "expected a mapping")
    known = ("kind", "variable", "value", "order", "intervention", "t", "t_prime")
    for k in raw:
        if k not in known:
            raise ctx.error(("target", k), f"unknown target field; expected one of {known}")
    try:
        return TargetSpec(**{k: raw[k] for k in known if k in raw})
    except (TargetError, TypeError) as exc:
        raise ctx.error(("target",), str(exc)) from None


def _arm_table(ctx, path, raw, arms):
    """Accept a list in arm order or a mapping keyed by comma-joined arms."""
    if isinstance(raw, dict):
        out = {}
        for key, val in raw.items():
            try:
                arm = tuple(int(s) for s in str(key).split(",") if s.strip() != "")
            except ValueError:
                raise ctx.error(path + (key,), f"bad arm key {key!r}") from None
            out[arm] = val
        return out
    if isinstance(raw, list):
        if len(arms) == 1 and raw and not isinstance(raw[0], (list, dict)) and len(raw) != 1:
            return {arms[0]: raw}
        if len(raw) != len(arms):
            raise ctx.error(path, f"expected {len(arms)} entries (one per arm), got {len(raw)}")
        return dict(zip(arms, raw))
    raise ctx.error(path, "expected a list or mapping")


def _observed(ctx, raw, network, target, relax):
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ctx.error(("observed",), "expected a mapping")
    instruments = raw.get("instruments")
    observed = raw.get("variables")
    if instruments is None or observed is None:
        try:
            net, witness, _ = prepare_network(network, target.protected, relax)
        except NotInFineClassError as exc:
            raise ctx.error(("observed",), f"{exc}; list observed.instruments and "
                                           "observed.variables explicitly or set options.relax") from None
        if instruments is None:
            instruments = list(witness.instruments)
        if observed is None:
            observed = [c for c in witness.children if net.variable(c).role == "observed"]
    for key, names in (("instruments", instruments), ("variables", observed)):
        for n in names:
            if n not in network.names:
                raise ctx.error(("observed", key), f"unknown variable {n!r}")
    cards = [network.cardinality(o) for o in observed]
    arms = list(itertools.product(*(range(network.cardinality(a)) for a in instruments)))

    marginal = None
    if instruments:
        if "instrument_marginal" not in raw:
            raise ctx.error(("observed",), "instrument_marginal is required when there are instruments")
        m = _arm_table(ctx, ("observed", "instrument_marginal"), raw["instrument_marginal"], arms)
        marginal = {}
        for arm, p in m.items():
            if arm not in arms:
                raise ctx.error(("observed", "instrument_marginal"), f"arm {arm} out of range")
            marginal[arm] = float(p)
    if "conditionals" not in raw:
        raise ctx.error(("observed",), "conditionals are required")
    conds_raw = _arm_table(ctx, ("observed", "conditionals"), raw["conditionals"], arms)
    conds = {}
    size = int(np.prod(cards, dtype=np.int64))
    for i, (arm, table) in enumerate(conds_raw.items()):
        path = ("observed", "conditionals", _raw_key(raw["conditionals"], i))
        if arm not in arms:
            raise ctx.error(path, f"arm {arm} out of range")
        arr = np.asarray(table, dtype=float).ravel()
        if arr.size != size:
            raise ctx.error(path, f"dimension mismatch: expected {size} entries, got {arr.size}")
        conds[arm] = arr.reshape(cards)
    try:
        return ObservedData(tuple(instruments), tuple(observed), marginal, conds)
    except DataError as exc:
        raise ctx.error(("observed",) + _locate(exc, raw), str(exc)) from None


def _raw_key(raw, i):
    return list(raw)[i] if isinstance(raw, dict) else i


def _locate(exc, raw):
    """Best-effort field path for a data error message."""
    msg = str(exc)
    if "marginal" in msg:
        return ("instrument_marginal",)
    if "arm (" in msg and isinstance(raw.get("conditionals"), (dict, list)):
        arm = msg.split("arm (", 1)[1].split(")", 1)[0]
        arm = tuple(int(s) for s in arm.split(",") if s.strip())
        conds = raw["conditionals"]
        keys = list(conds) if isinstance(conds, dict) else list(range(len(conds)))
        for k in keys:
            key = tuple(int(s) for s in str(k).split(",") if s.strip()) if isinstance(conds, dict) else None
            if key == arm:
                return ("conditionals", k)
        return ("conditionals",)
    return ()


def _sweep(ctx, raw, assumptions):
    if raw is None:
        return SweepPlan()
    if not isinstance(raw, dict):
        raise ctx.error(("sweep",), "expected a mapping")
    names = {a["name"] for a in assumptions}
    subsets = raw.get("subsets")
    if subsets is not None:
        for i, s in enumerate(subsets):
            for n in s or []:
                if n not in names:
                    raise ctx.error(("sweep", "subsets", i), f"unknown assumption {n!r}")
        subsets = [list(s or []) for s in subsets]
    param, values = raw.get("parameter"), raw.get("values")
    if (param is None) != (values is None):
        raise ctx.error(("sweep",), "parameter and values go together")
    if param is not None:
        name = str(param).partition(".")[0]
        if name not in names or "." not in str(param):
            raise ctx.error(("sweep", "parameter"), f"parameter path {param!r} must be <assumption>.<field>")
        if not isinstance(values, list) or not values:
            raise ctx.error(("sweep", "values"), "expected a non-empty list")
    return SweepPlan(subsets, param, values)

