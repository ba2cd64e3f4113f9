"""Sparse affine forms over the atoms of a response space."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

RELATIONS = ("=", "<=", ">=")


@dataclass(frozen=True, eq=False)
class LinearExpression:
    """``sum_k values[k] * psi[indices[k]] + constant``.

    Indices are kept sorted and unique; zero coefficients are never stored.
    """

    indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    constant: float = 0.0

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        val = np.asarray(self.values, dtype=float).ravel()
        if idx.shape != val.shape:
            raise ValueError("indices and values must have the same length")
        if idx.size and (np.any(np.diff(idx) <= 0)):
            order = np.argsort(idx, kind="stable")
            idx, val = idx[order], val[order]
            uniq, start = np.unique(idx, return_index=True)
            val = np.add.reduceat(val, start)
            idx = uniq
        keep = val != 0.0
        if not keep.all():
            idx, val = idx[keep], val[keep]
        if idx.size and idx[0] < 0:
            raise ValueError("negative atom index")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        object.__setattr__(self, "constant", float(self.constant))

    @classmethod
    def from_mask(cls, mask, weight: float = 1.0) -> "LinearExpression":
        idx = np.flatnonzero(np.asarray(mask))
        return cls(idx, np.full(idx.size, float(weight)))

    @classmethod
    def from_dense(cls, coefficients, constant: float = 0.0) -> "LinearExpression":
        coefficients = np.asarray(coefficients, dtype=float)
        idx = np.flatnonzero(coefficients)
        return cls(idx, coefficients[idx], constant)

    @classmethod
    def from_dict(cls, coefficients: Mapping[int, float], constant: float = 0.0):
        items = sorted(coefficients.items())
        return cls(
            np.array([k for k, _ in items], dtype=np.int64),
            np.array([v for _, v in items], dtype=float),
            constant,
        )

    def as_dict(self) -> dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.indices, self.values)}

    def to_dense(self, size: int) -> np.ndarray:
        if self.indices.size and self.indices[-1] >= size:
            raise ValueError(f"atom index {self.indices[-1]} out of range for size {size}")
        out = np.zeros(size)
        out[self.indices] = self.values
        return out

    def evaluate(self, psi) -> float:
        psi = np.asarray(psi, dtype=float)
        return float(self.values @ psi[self.indices] + self.constant)

    @property
    def max_index(self) -> int:
        return int(self.indices[-1]) if self.indices.size else -1

    def __len__(self) -> int:
        return int(self.indices.size)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return LinearExpression(self.indices, self.values, self.constant + other)
        return LinearExpression(
            np.concatenate([self.indices, other.indices]),
            np.concatenate([self.values, other.values]),
            self.constant + other.constant,
        )

    __radd__ = __add__

    def __neg__(self):
        return LinearExpression(self.indices, -self.values, -self.constant)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar: float):
        return LinearExpression(self.indices, self.values * scalar, self.constant * scalar)

    __rmul__ = __mul__

    def equals(self, other: "LinearExpression", tol: float = 0.0) -> bool:
        diff = self - other
        return bool(np.all(np.abs(diff.values) <= tol) and abs(diff.constant) <= tol)

    def __repr__(self):
        terms = ", ".join(f"{i}:{v:g}" for i, v in zip(self.indices[:8], self.values[:8]))
        more = "" if self.indices.size <= 8 else f", ... ({self.indices.size} terms)"
        return f"LinearExpression({{{terms}{more}}}, constant={self.constant:g})"


@dataclass(frozen=True)
class LinearConstraint:
    expression: LinearExpression
    relation: str
    rhs: float
    label: str

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        if not np.isfinite(self.rhs):
            raise ValueError("constraint rhs must be finite")
        if not self.label:
            raise ValueError("constraint label must be non-empty")
        object.__setattr__(self, "rhs", float(self.rhs))

    def residual(self, psi) -> float:
        """Amount by which ``psi`` violates the constraint (0 when satisfied)."""
        lhs = self.expression.evaluate(psi)
        if self.relation == "=":
            return abs(lhs - self.rhs)
        if self.relation == "<=":
            return max(0.0, lhs - self.rhs)
        return max(0.0, self.rhs - lhs)


def max_residual(constraints, psi) -> float:
    return max((c.residual(psi) for c in constraints), default=0.0)


def equality_with_slack(expression, rhs, label, slack=0.0) -> list[LinearConstraint]:
    """``expression = rhs``, or the band ``|expression - rhs| <= slack``."""
    if slack < 0:
        raise ValueError("slack must be non-negative")
    if slack == 0:
        return [LinearConstraint(expression, "=", rhs, label)]
    return [
        LinearConstraint(expression, "<=", rhs + slack, label + "/upper"),
        LinearConstraint(expression, ">=", rhs - slack, label + "/lower"),
    ]
