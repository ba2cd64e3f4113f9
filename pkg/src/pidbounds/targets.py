"""Linear objectives for the parameters we bound."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import DataError, ObservedData, averaged_coefficients, instrument_weights
from .linear import LinearExpression
from .model import NetworkError
from .response import ResponseSpace

TARGET_KINDS = ("pmf", "moment", "interventional_pmf", "ate", "prob_nonzero_effect")


class TargetError(ValueError):
    pass


@dataclass(frozen=True)
class TargetSpec:
    """What to bound.

    ``pmf``/``moment`` are factual (averaged over the observed instrument
    distribution). ``interventional_pmf`` is P(variable(t) = value) under
    do(intervention = t). ``ate`` is E[variable(t) - variable(t_prime)] and
    ``prob_nonzero_effect`` is P(variable(t) != variable(t_prime)).
    """

    kind: str
    variable: str
    value: int | None = None
    order: int = 1
    intervention: str | None = None
    t: int | None = None
    t_prime: int | None = None

    def __post_init__(self):
        if self.kind not in TARGET_KINDS:
            raise TargetError(f"unknown target kind {self.kind!r}; expected one of {TARGET_KINDS}")
        needs_value = self.kind in ("pmf", "interventional_pmf")
        if needs_value and self.value is None:
            raise TargetError(f"{self.kind} target needs a value")
        if self.kind in ("interventional_pmf", "ate", "prob_nonzero_effect"):
            if self.intervention is None or self.t is None:
                raise TargetError(f"{self.kind} target needs an intervention variable and t")
        if self.kind in ("ate", "prob_nonzero_effect") and self.t_prime is None:
            raise TargetError(f"{self.kind} target needs t_prime")
        if self.kind == "moment" and self.order < 0:
            raise TargetError("moment order must be non-negative")

    @property
    def protected(self) -> frozenset:
        """Variables whose confounded-instrument reductions must be skipped."""
        return frozenset([self.intervention]) if self.intervention else frozenset()

    def describe(self) -> str:
        v = self.variable
        if self.kind == "pmf":
            return f"P({v}={self.value})"
        if self.kind == "moment":
            return f"E[{v}]" if self.order == 1 else f"E[{v}^{self.order}]"
        if self.kind == "interventional_pmf":
            return f"P({v}({self.intervention}={self.t})={self.value})"
        if self.kind == "ate":
            return f"E[{v}({self.intervention}={self.t}) - {v}({self.intervention}={self.t_prime})]"
        return f"P({v}({self.intervention}={self.t}) != {v}({self.intervention}={self.t_prime}))"


def _check(space: ResponseSpace, target: TargetSpec):
    if target.variable not in space.network.names:
        raise TargetError(f"target variable {target.variable!r} does not exist")
    if target.variable not in space.endogenous:
        raise TargetError(f"target variable {target.variable!r} is not endogenous")
    card = space.cardinality(target.variable)
    if target.value is not None and not 0 <= target.value < card:
        raise TargetError(f"value {target.value} out of range for {target.variable!r}")
    if target.intervention is not None:
        if target.intervention not in space.network.names:
            raise TargetError(f"intervention variable {target.intervention!r} does not exist")
        if space.network.variable(target.intervention).is_exogenous:
            raise NetworkError(f"cannot intervene on exogenous variable {target.intervention!r}")
        tc = space.cardinality(target.intervention)
        for t in (target.t, target.t_prime):
            if t is not None and not 0 <= t < tc:
                raise TargetError(f"intervention value {t} out of range for {target.intervention!r}")


def build_target(space: ResponseSpace, data: ObservedData | None, target: TargetSpec) -> LinearExpression:
    _check(space, target)
    marginal = data.instrument_marginal if data is not None else None
    x = target.variable

    def avg(fn, intervention=None):
        try:
            return averaged_coefficients(space, marginal, fn, intervention)
        except DataError as exc:
            raise DataError(f"{target.describe()}: {exc}") from None

    if target.kind == "pmf":
        coef = avg(lambda v: v[x] == target.value)
    elif target.kind == "moment":
        coef = avg(lambda v: v[x].astype(float) ** target.order)
    elif target.kind == "interventional_pmf":
        coef = avg(lambda v: v[x] == target.value, {target.intervention: target.t})
    else:
        t_vals = _paired(space, marginal, x, target.intervention, target.t, target.t_prime)
        if target.kind == "ate":
            coef = sum(w * (a.astype(float) - b) for w, a, b in t_vals)
        else:
            coef = sum(w * (a != b) for w, a, b in t_vals)
    return LinearExpression.from_dense(np.asarray(coef, dtype=float))


def _paired(space, marginal, x, treatment, t, t_prime):
    """(weight, x under do(t), x under do(t')) for each free-instrument setting.

    Both counterfactuals share the same free-instrument draw.
    """
    out = []
    for free, w in instrument_weights(space, marginal, {treatment: t}):
        a = space.propagate_all(free, {treatment: t})[x]
        b = space.propagate_all(free, {treatment: t_prime})[x]
        out.append((w, a, b))
    return out
