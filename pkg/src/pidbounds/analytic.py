"""Closed-form sharp bounds on P(X=1) for the binary chain A -> X -> Y.

The identified set can be a union of two disjoint intervals, one per
matching between the labels of X and Y.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MERGE_TOL = 1e-12


@dataclass(frozen=True)
class IntervalUnion:
    intervals: tuple[tuple[float, float], ...]
    notes: tuple[str, ...] = ()

    @classmethod
    def of(cls, intervals, merge: bool = True, notes=()) -> "IntervalUnion":
        ivs = []
        for lo, hi in intervals:
            lo, hi = float(lo), float(hi)
            if lo > hi + MERGE_TOL:
                raise ValueError(f"interval [{lo}, {hi}] has lo > hi")
            lo, hi = min(lo, hi), max(lo, hi)
            ivs.append((min(max(lo, 0.0), 1.0), min(max(hi, 0.0), 1.0)))
        ivs.sort()
        if merge:
            merged: list[tuple[float, float]] = []
            for lo, hi in ivs:
                if merged and lo <= merged[-1][1] + MERGE_TOL:
                    merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
                else:
                    merged.append((lo, hi))
            ivs = merged
        return cls(tuple(ivs), tuple(notes))

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    @property
    def lower(self) -> float:
        return self.intervals[0][0]

    @property
    def upper(self) -> float:
        return self.intervals[-1][1]

    @property
    def endpoints(self) -> list[float]:
        return [v for iv in self.intervals for v in iv]

    def contains(self, value: float, tol: float = 1e-9) -> bool:
        return any(lo - tol <= value <= hi + tol for lo, hi in self.intervals)

    def distance(self, value: float) -> float:
        return min((max(lo - value, 0.0, value - hi) for lo, hi in self.intervals), default=np.inf)

    def subset_of(self, other: "IntervalUnion", tol: float = 1e-9) -> bool:
        return all(
            any(lo >= olo - tol and hi <= ohi + tol for olo, ohi in other.intervals)
            for lo, hi in self.intervals
        )

    def _directed(self, other) -> float:
        # sup over points of self of the distance to other; attained at an
        # endpoint of self or at the midpoint of a gap of other
        cands = list(self.endpoints)
        for (_, a), (b, _) in zip(other.intervals, other.intervals[1:]):
            mid = 0.5 * (a + b)
            if self.contains(mid, 0.0):
                cands.append(mid)
        return max((other.distance(v) for v in cands), default=0.0)

    def hausdorff(self, other: "IntervalUnion") -> float:
        if self.is_empty or other.is_empty:
            return 0.0 if self.is_empty and other.is_empty else np.inf
        return max(self._directed(other), other._directed(self))

    def as_list(self) -> list[list[float]]:
        return [[lo, hi] for lo, hi in self.intervals]

    def __str__(self):
        if self.is_empty:
            return "{}"
        return " U ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in self.intervals)


def _as_p1(p):
    """P(Y=1) from a scalar or a length-2 distribution."""
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if arr.size == 1:
        return float(arr[0])
    if arr.shape[-1] != 2:
        raise ValueError("expected P(Y=1) or a distribution over {0, 1}")
    return float(arr[..., 1]) if arr.ndim == 1 else arr[..., 1]


def _inputs(p_y, p_y_given_a):
    p1 = _as_p1(p_y)
    cond = np.asarray(p_y_given_a, dtype=float)
    p1a = cond[:, 1] if cond.ndim == 2 else cond
    if p1a.size == 0:
        raise ValueError("need at least one instrument arm")
    if np.any((p1a < 0) | (p1a > 1)) or not 0 <= p1 <= 1:
        raise ValueError("probabilities must lie in [0, 1]")
    if not p1a.min() - 1e-9 <= p1 <= p1a.max() + 1e-9:
        raise ValueError("P(Y=1) must be a mixture of the per-arm P(Y=1 | A=a)")
    return p1, p1a


def _branch(p, pa):
    """[ (p - min)/(1 - min), p / max ] for one label of Y, with degenerate limits."""
    m, M = float(pa.min()), float(pa.max())
    notes = []
    if m >= 1.0:
        notes.append("min_a P(Y=y|A=a) = 1: branch collapses")
        return ([(p, p)] if p >= 1.0 else []), notes
    if M <= 0.0:
        notes.append("max_a P(Y=y|A=a) = 0: branch collapses")
        return [(0.0, 0.0)], notes
    return [((p - m) / (1.0 - m), p / M)], notes


def prop3_bounds(p_y, p_y_given_a, merge: bool = True) -> IntervalUnion:
    """Sharp bounds on P(X=1) when A is independent of Y given X (binary X, Y).

    ``p_y`` is P(Y=1) (or the distribution of Y); ``p_y_given_a`` holds
    P(Y=1 | A=a) per arm (or per-arm distributions).
    """
    p1, p1a = _inputs(p_y, p_y_given_a)
    ivs1, n1 = _branch(p1, p1a)
    ivs0, n0 = _branch(1.0 - p1, 1.0 - p1a)
    notes = n1 + n0 + ["assumes X and Y are dependent, which the observables cannot confirm"]
    return IntervalUnion.of(ivs1 + ivs0, merge, notes)


def prop3_corollary_bounds(variant: str, p_y, p_y_given_a, merge: bool = True) -> IntervalUnion:
    """Refinements of ``prop3_bounds`` under extra error-model assumptions.

    ``A1``: P(Y=1 | X=0) = 0.
    ``A3``: P(Y=0 | X=0) > P(Y=1 | X=0).
    ``label_independent``: P(Y=1 | X=0) = P(Y=0 | X=1).
    """
    p1, p1a = _inputs(p_y, p_y_given_a)
    m, M = float(p1a.min()), float(p1a.max())
    notes = []
    if variant == "A1":
        if M <= 0:
            return IntervalUnion.of([(p1, p1)], merge, ["max_a P(Y=1|A=a) = 0"])
        return IntervalUnion.of([(p1, p1 / M)], merge)
    if variant == "A3":
        return _a3_bounds(p1, m, M, merge)
    if variant == "label_independent":
        p_star = min(m, 1.0 - M)
        if p_star >= 0.5:
            notes.append("p* = 1/2: error rate unidentified, set reported as [p1, 1 - p1]")
            return IntervalUnion.of([(min(p1, 1 - p1), max(p1, 1 - p1))], merge, notes)
        f = (p1 - p_star) / (1.0 - 2.0 * p_star)
        first = (min(p1, f), max(p1, f))
        second = (1.0 - first[1], 1.0 - first[0])
        return IntervalUnion.of([first, second], merge, notes)
    raise ValueError(f"unknown corollary variant {variant!r}")


def _a3_bounds(p1, m, M, merge):
    """Identified set under P(Y=1 | X=0) < 1/2.

    Matches the textbook closed form [(p1 - m)/(1 - m), p1/M] whenever
    m <= 1/2 <= M. Outside that range the label-swapped branch (q11 < q10)
    is also feasible, or the lower endpoint is capped at q10 = 1/2; both
    are included so the set stays valid and sharp (endpoints at q10 = 1/2
    are suprema, reported as closed).
    """
    ivs, notes = [], []
    if M > 0:
        q = min(m, 0.5)
        ivs.append(((p1 - q) / (1.0 - q), p1 / M))
    if M < 0.5:
        ivs.append((1.0 - p1 / M if M > 0 else 0.0, (0.5 - p1) / (0.5 - m)))
        notes.append("max_a P(Y=1|A=a) < 1/2: label-swapped branch is feasible")
    if m > 0.5:
        notes.append("min_a P(Y=1|A=a) > 1/2: lower endpoint limited by P(Y=1|X=0) < 1/2")
    return IntervalUnion.of(ivs, merge, notes)
