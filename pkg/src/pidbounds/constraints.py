"""Compile modeling assumptions into linear constraints over response atoms.

Every constraint carries a label of the form::

    [name=]KIND[param=value,...]@ARM#DETAIL

where ``ARM`` is ``obs`` for constraints on the factual distribution,
``do(A=0)`` for constraints on one interventional arm, or ``A=0`` for an
observed-data row. ``parse_label`` inverts the format.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .linear import LinearConstraint, LinearExpression, equality_with_slack
from .model import OBSERVED
from .response import ResponseSpace

DIST_TOL = 1e-9
MEASUREMENT_KINDS = ("A0", "A1", "A2", "A3")
CAUSAL_KINDS = ("A4", "A5")
ASSUMPTION_KINDS = MEASUREMENT_KINDS + CAUSAL_KINDS
LEVELS = ("observed", "per-arm-counterfactual")
_LEVEL_ALIASES = {"counterfactual": "per-arm-counterfactual", "per-arm": "per-arm-counterfactual"}


class AssumptionError(ValueError):
    pass


class DataError(ValueError):
    pass


# --------------------------------------------------------------------------- data


def _arm_key(arm) -> tuple[int, ...]:
    if isinstance(arm, (int, np.integer)):
        return (int(arm),)
    return tuple(int(v) for v in arm)


@dataclass(frozen=True)
class ObservedData:
    """P(instruments) and P(observed children | instrument arm).

    ``arm_conditionals[a]`` is an array shaped by the cardinalities of the
    observed children (in the response space's child order).
    """

    instruments: tuple[str, ...]
    observed: tuple[str, ...]
    instrument_marginal: dict | None
    arm_conditionals: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "instruments", tuple(self.instruments))
        object.__setattr__(self, "observed", tuple(self.observed))
        if self.instrument_marginal is not None:
            marginal = {_arm_key(k): float(v) for k, v in self.instrument_marginal.items()}
            object.__setattr__(self, "instrument_marginal", marginal)
            _check_distribution(np.array(list(marginal.values())), "instrument marginal")
        conds = {_arm_key(k): np.asarray(v, dtype=float) for k, v in self.arm_conditionals.items()}
        object.__setattr__(self, "arm_conditionals", conds)
        for arm, table in conds.items():
            _check_distribution(table, f"conditional for arm {arm}")
        if self.instrument_marginal is not None:
            for arm, p in self.instrument_marginal.items():
                if p > 0 and arm not in conds:
                    raise DataError(f"arm conditional missing for instrument arm {arm}")

    def arm_probability(self, arm) -> float | None:
        if self.instrument_marginal is None:
            return None
        return self.instrument_marginal.get(_arm_key(arm), 0.0)

    def active_arms(self) -> list[tuple[int, ...]]:
        arms = sorted(self.arm_conditionals)
        if self.instrument_marginal is None:
            return arms
        return [a for a in arms if self.instrument_marginal.get(a, 0.0) > 0]

    def check_against(self, space: ResponseSpace) -> None:
        if self.instruments != space.instruments:
            raise DataError(
                f"data instruments {self.instruments} do not match the network's {space.instruments}"
            )
        observed = observed_children(space)
        if self.observed != observed:
            raise DataError(f"data observed variables {self.observed} do not match {observed}")
        shape = tuple(space.cardinality(o) for o in observed)
        for arm, table in self.arm_conditionals.items():
            if len(arm) != len(space.instruments) or any(
                not 0 <= v < k for v, k in zip(arm, space.instrument_cards)
            ):
                raise DataError(f"arm {arm} is not a valid joint instrument value")
            if table.shape != shape:
                raise DataError(f"dimension mismatch for arm {arm}: got {table.shape}, expected {shape}")
        if self.instrument_marginal is not None:
            for arm in self.instrument_marginal:
                if len(arm) != len(space.instruments):
                    raise DataError(f"marginal arm {arm} has the wrong arity")


def _check_distribution(values, what):
    values = np.asarray(values, dtype=float)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise DataError(f"{what}: entries must be finite and non-negative")
    total = values.sum()
    if abs(total - 1.0) > DIST_TOL:
        raise DataError(f"{what}: distribution not normalized (sums to {total:.12g})")


def observed_children(space: ResponseSpace) -> tuple[str, ...]:
    return tuple(c.name for c in space.children if space.network.variable(c.name).role == OBSERVED)


def observed_from_psi(space: ResponseSpace, psi, instrument_marginal=None) -> ObservedData:
    """Exact observables implied by a response distribution."""
    psi = np.asarray(psi, dtype=float)
    observed = observed_children(space)
    shape = tuple(space.cardinality(o) for o in observed)
    arms = space.arms()
    if instrument_marginal is None:
        if space.instruments:
            raise DataError("instrument marginal required")
        instrument_marginal = {(): 1.0}
    conds = {}
    for arm in arms:
        values = space.propagate_all(dict(zip(space.instruments, arm)))
        flat = np.zeros(space.atom_count, dtype=np.int64)
        for o in observed:
            flat = flat * space.cardinality(o) + values[o]
        table = np.bincount(flat, weights=psi, minlength=int(np.prod(shape, dtype=np.int64)))
        table = np.clip(table, 0.0, None)
        conds[arm] = (table / table.sum()).reshape(shape)
    return ObservedData(space.instruments, observed, instrument_marginal, conds)


# ------------------------------------------------------------------- averaging


def _marginal_of(data):
    """Instrument marginal from ObservedData, a raw {arm: p} dict, or None."""
    if data is None or isinstance(data, dict):
        return None if data is None else {_arm_key(k): float(v) for k, v in data.items()}
    return data.instrument_marginal


def instrument_weights(space: ResponseSpace, marginal, intervention) -> list[tuple[dict, float]]:
    """Settings of the non-intervened instruments with their probabilities."""
    free = [a for a in space.instruments if a not in intervention]
    if not free:
        return [({}, 1.0)]
    if marginal is None:
        raise DataError("P(instruments) is required to average over instruments " + ", ".join(free))
    pos = [space.instruments.index(a) for a in free]
    weights: dict[tuple, float] = {}
    for arm, p in sorted(marginal.items()):
        key = tuple(arm[i] for i in pos)
        weights[key] = weights.get(key, 0.0) + p
    return [(dict(zip(free, key)), w) for key, w in sorted(weights.items()) if w > 0]


def averaged_coefficients(space: ResponseSpace, marginal, fn, intervention=None) -> np.ndarray:
    """Dense coefficients of ``sum_b P(b) * fn(values under b, do(intervention))``.

    ``fn`` maps the dict of propagated value arrays to a per-atom array.
    """
    intervention = dict(intervention or {})
    total = np.zeros(space.atom_count)
    for setting, w in instrument_weights(space, marginal, intervention):
        values = space.propagate_all(setting, intervention)
        total += w * np.asarray(fn(values), dtype=float)
    return total


# ----------------------------------------------------------------------- labels

_LABEL_RE = re.compile(
    r"^(?:(?P<name>[^=\[\]@#]+)=)?(?P<kind>[A-Za-z0-9_]+)"
    r"(?:\[(?P<params>[^\]]*)\])?(?:@(?P<arm>[^#]*))?(?:#(?P<detail>.*))?$"
)


def make_label(kind, params=None, arm=None, detail=None, name=None) -> str:
    out = "" if name in (None, kind) else f"{name}="
    out += kind
    if params:
        out += "[" + ",".join(f"{k}={_fmt(v)}" for k, v in params.items()) + "]"
    if arm is not None:
        out += f"@{arm}"
    if detail:
        out += f"#{detail}"
    return out


def parse_label(label: str) -> dict:
    m = _LABEL_RE.match(label)
    if m is None:
        raise ValueError(f"malformed constraint label {label!r}")
    params = {}
    if m.group("params"):
        for item in m.group("params").split(","):
            k, _, v = item.partition("=")
            params[k] = v
    return {
        "name": m.group("name") or m.group("kind"),
        "kind": m.group("kind"),
        "params": params,
        "arm": m.group("arm"),
        "detail": m.group("detail"),
    }


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "(" + ";".join(_fmt(x) for x in v) + ")"
    return str(v)


def _arm_str(names, values, do=False) -> str:
    inner = ",".join(f"{n}={v}" for n, v in zip(names, values))
    if do:
        return f"do({inner})"
    return inner or "-"


# ----------------------------------------------------------------- probability


def compile_probability(space, explicit_nonnegativity: bool = False) -> list[LinearConstraint]:
    """Sum-to-one; non-negativity is implicit in the solver's standard form."""
    n = space if isinstance(space, int) else space.atom_count
    all_atoms = LinearExpression(np.arange(n), np.ones(n))
    out = [LinearConstraint(all_atoms, "=", 1.0, "PROB")]
    if explicit_nonnegativity:
        out += [
            LinearConstraint(LinearExpression([i], [1.0]), ">=", 0.0, f"PROB#nonneg={i}")
            for i in range(n)
        ]
    return out


def compile_observed(space: ResponseSpace, data: ObservedData, slack: float = 0.0) -> list[LinearConstraint]:
    """Pin P(observed children | arm) for every arm with positive probability."""
    data.check_against(space)
    observed = data.observed
    cards = [space.cardinality(o) for o in observed]
    out = []
    for arm in data.active_arms():
        values = space.propagate_all(dict(zip(space.instruments, arm)))
        cell = np.zeros(space.atom_count, dtype=np.int64)
        for o, k in zip(observed, cards):
            cell = cell * k + values[o]
        table = data.arm_conditionals[arm].ravel()
        order = np.argsort(cell, kind="stable")
        bounds = np.searchsorted(cell[order], np.arange(table.size + 1))
        for flat, joint in enumerate(itertools.product(*(range(k) for k in cards))):
            idx = order[bounds[flat] : bounds[flat + 1]]
            expr = LinearExpression(np.sort(idx), np.ones(idx.size))
            label = make_label(
                "OBS", arm=_arm_str(space.instruments, arm), detail=_arm_str(observed, joint)
            )
            out += equality_with_slack(expr, table[flat], label, slack)
    return out


# ----------------------------------------------------------------- measurement


def _distance_fn(distance, nx, ny):
    if distance is None:
        return lambda x, y: abs(x - y)
    d = np.asarray(distance, dtype=float)
    if d.shape != (nx, ny):
        raise AssumptionError(f"distance matrix must have shape {(nx, ny)}, got {d.shape}")
    return lambda x, y: float(d[x, y])


def _mass_arms(space, truth, proxy, level, marginal):
    """Yield (arm label, cell-index arrays with weights) for each arm.

    The cell index of an atom is ``x * |proxy| + y``; mass(x, y) for the arm
    is the weighted count of atoms landing in that cell.
    """
    ny = space.cardinality(proxy)
    level = _LEVEL_ALIASES.get(level, level)
    if level == "observed":
        parts = []
        for setting, w in instrument_weights(space, marginal, {}):
            vals = space.propagate_all(setting)
            parts.append((vals[truth] * ny + vals[proxy], w))
        yield "obs", parts
    elif level == "per-arm-counterfactual":
        parents = space.children[space.child_index[truth]].parents if truth in space.child_index else ()
        cards = [space.cardinality(p) for p in parents]
        for setting in itertools.product(*(range(k) for k in cards)):
            intervention = dict(zip(parents, setting))
            parts = []
            for free, w in instrument_weights(space, marginal, intervention):
                vals = space.propagate_all(free, intervention)
                parts.append((vals[truth] * ny + vals[proxy], w))
            yield _arm_str(parents, setting, do=True), parts
    else:
        raise AssumptionError(f"unknown level {level!r}; expected one of {LEVELS}")


def _group_by_cell(cell, ncells):
    order = np.argsort(cell, kind="stable")
    bounds = np.searchsorted(cell[order], np.arange(ncells + 1))
    return [np.sort(order[bounds[c] : bounds[c + 1]]) for c in range(ncells)]


def _cell_masses(parts, ncells) -> list[LinearExpression]:
    """mass(cell) as an expression, for every cell."""
    masses = [LinearExpression() for _ in range(ncells)]
    for cell, w in parts:
        for c, idx in enumerate(_group_by_cell(cell, ncells)):
            masses[c] = masses[c] + LinearExpression(idx, np.full(idx.size, w))
    return masses


def _sum(exprs) -> LinearExpression:
    exprs = list(exprs)
    if not exprs:
        return LinearExpression()
    return LinearExpression(
        np.concatenate([e.indices for e in exprs]), np.concatenate([e.values for e in exprs])
    )


def compile_measurement(space: ResponseSpace, kind: str, params: Mapping | None = None,
                        level: str = "observed", *, truth: str = "X", proxy: str = "Y",
                        data: ObservedData | None = None, slack: float = 0.0,
                        distance=None, name: str | None = None) -> list[LinearConstraint]:
    """Measurement-error assumptions relating a truth variable to its proxy.

    A0: mass with distance above ``threshold`` is at most ``epsilon``.
    A1: no mass below the diagonal (errors only go up).
    A2: |mass(x,y) - mass(x,y')| <= ``lambda`` whenever d(x,y) = d(x,y').
    A3: mass(x,y) >= mass(x,y') whenever d(x,y) < d(x,y').
    """
    if kind not in MEASUREMENT_KINDS:
        raise AssumptionError(f"unknown assumption kind {kind!r}")
    params = dict(params or {})
    if slack < 0:
        raise AssumptionError("slack must be non-negative")
    for v in (truth, proxy):
        if v not in space.endogenous:
            raise AssumptionError(f"{kind}: variable {v!r} is not in the response space")
    nx, ny = space.cardinality(truth), space.cardinality(proxy)
    dist = _distance_fn(distance, nx, ny)
    marginal = _marginal_of(data)
    level = _LEVEL_ALIASES.get(level, level)

    label_params = {"X": truth, "Y": proxy}
    if kind == "A0":
        eps = float(params.get("epsilon", 0.0))
        thr = float(params.get("threshold", params.get("distance_threshold", 0.0)))
        if eps < 0:
            raise AssumptionError("A0: epsilon must be non-negative")
        label_params.update(epsilon=eps, threshold=thr)
    elif kind == "A2":
        lam = float(params.get("lambda", params.get("lam", 0.0)))
        if lam < 0:
            raise AssumptionError("A2: lambda must be non-negative")
        label_params["lambda"] = lam
    if slack:
        label_params["slack"] = slack

    out: list[LinearConstraint] = []
    for arm, parts in _mass_arms(space, truth, proxy, level, marginal):
        mass = _cell_masses(parts, nx * ny)

        def label(detail=None):
            return make_label(kind, label_params, arm, detail, name)

        if kind == "A0":
            cells = [x * ny + y for x in range(nx) for y in range(ny) if dist(x, y) > thr]
            out.append(LinearConstraint(_sum(mass[c] for c in cells), "<=", eps + slack, label()))
        elif kind == "A1":
            cells = [x * ny + y for x in range(nx) for y in range(ny) if y < x]
            expr = _sum(mass[c] for c in cells)
            if slack:
                out.append(LinearConstraint(expr, "<=", slack, label()))
            else:
                out.append(LinearConstraint(expr, "=", 0.0, label()))
        elif kind == "A2":
            for x in range(nx):
                for y, y2 in itertools.combinations(range(ny), 2):
                    if dist(x, y) != dist(x, y2):
                        continue
                    diff = mass[x * ny + y] - mass[x * ny + y2]
                    detail = f"x={x},y={y},y'={y2}"
                    out.append(LinearConstraint(diff, "<=", lam + slack, label(detail + "/upper")))
                    out.append(LinearConstraint(diff, ">=", -lam - slack, label(detail + "/lower")))
        elif kind == "A3":
            for x in range(nx):
                for y in range(ny):
                    for y2 in range(ny):
                        if dist(x, y) < dist(x, y2):
                            diff = mass[x * ny + y] - mass[x * ny + y2]
                            out.append(LinearConstraint(diff, ">=", -slack, label(f"x={x},y={y},y'={y2}")))
    return out


# ---------------------------------------------------------------------- causal


def compile_causal(space: ResponseSpace, kind: str, treatment: str, outcome: str,
                   slack: float = 0.0, *, data: ObservedData | None = None,
                   pairs=None, name: str | None = None) -> list[LinearConstraint]:
    """Monotone effect of ``treatment`` on ``outcome``.

    A4 (treatment on truth) and A5 (truth on proxy) share the same form: the
    mass of atoms with ``outcome(t') < outcome(t)`` for ``t < t'`` is zero,
    or at most ``slack``. One constraint per ordered pair of treatment values.
    """
    if kind not in CAUSAL_KINDS:
        raise AssumptionError(f"unknown assumption kind {kind!r}")
    if slack < 0:
        raise AssumptionError("slack must be non-negative")
    for v in (treatment, outcome):
        if v not in space.endogenous:
            raise AssumptionError(f"{kind}: variable {v!r} is not in the response space")
    nt = space.cardinality(treatment)
    if pairs is None:
        pairs = list(itertools.combinations(range(nt), 2))
    marginal = _marginal_of(data)
    params = {"T": treatment, "O": outcome}
    if slack:
        params["slack"] = slack
    out = []
    for t, t2 in pairs:
        if not (0 <= t < nt and 0 <= t2 < nt) or t == t2:
            raise AssumptionError(f"{kind}: treatment values ({t}, {t2}) out of range for {treatment!r}")
        lo, hi = min(t, t2), max(t, t2)
        coef = np.zeros(space.atom_count)
        for free, w in _causal_weights(space, marginal, treatment, outcome):
            low = space.propagate_all(free, {treatment: lo})[outcome]
            high = space.propagate_all(free, {treatment: hi})[outcome]
            coef += w * (high < low)
        expr = LinearExpression.from_dense(coef)
        label = make_label(kind, params, None, f"t={lo},t'={hi}", name)
        out.append(LinearConstraint(expr, "<=" if slack else "=", slack, label))
    return out


def _causal_weights(space, marginal, treatment, outcome):
    """Free-instrument settings for the monotonicity check.

    Without P(instruments) we can still proceed when the outcome's potential
    values do not depend on the free instruments (e.g. proxy under do(truth)).
    """
    if marginal is not None:
        return instrument_weights(space, marginal, {treatment: 0})
    free = [a for a in space.instruments if a != treatment]
    if not free:
        return [({}, 1.0)]
    settings = [dict(zip(free, s)) for s in itertools.product(
        *(range(space.cardinality(a)) for a in free))]
    for t in range(space.cardinality(treatment)):
        ref = space.propagate_all(settings[0], {treatment: t})[outcome]
        for s in settings[1:]:
            if not np.array_equal(space.propagate_all(s, {treatment: t})[outcome], ref):
                raise DataError("P(instruments) is required to average over instruments " + ", ".join(free))
    return [(settings[0], 1.0)]


def compile_assumption(space: ResponseSpace, assumption: Mapping, data: ObservedData | None = None):
    """Dispatch one assumption entry (as parsed from a model file)."""
    kind = assumption["kind"]
    name = assumption.get("name")
    slack = float(assumption.get("slack", 0.0) or 0.0)
    if kind in MEASUREMENT_KINDS:
        return compile_measurement(
            space, kind, assumption.get("params"), assumption.get("level", "observed"),
            truth=assumption.get("truth", "X"), proxy=assumption.get("proxy", "Y"),
            data=data, slack=slack, distance=assumption.get("distance"), name=name,
        )
    if kind in CAUSAL_KINDS:
        default = ("A", "X") if kind == "A4" else ("X", "Y")
        return compile_causal(
            space, kind, assumption.get("treatment", default[0]), assumption.get("outcome", default[1]),
            slack, data=data, pairs=assumption.get("pairs"), name=name,
        )
    raise AssumptionError(f"unknown assumption kind {kind!r}")
