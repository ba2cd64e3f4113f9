"""Linear programming core: two-phase dense simplex and the bounds driver."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .linear import LinearConstraint, LinearExpression, max_residual

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
STALL_FACTOR = 5

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    objective: LinearExpression
    constraints: tuple[LinearConstraint, ...]
    variable_count: int
    sense: str = "minimize"

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.sense not in ("minimize", "maximize"):
            raise ValueError(f"unknown sense {self.sense!r}")
        top = max([self.objective.max_index] + [c.expression.max_index for c in self.constraints])
        if top >= self.variable_count:
            raise ValueError(f"index {top} out of range for {self.variable_count} variables")

    def with_sense(self, sense: str) -> "LinearProgram":
        return LinearProgram(self.objective, self.constraints, self.variable_count, sense)

    def dense(self):
        """(A, relations, b, c, c0) with one dense row per constraint."""
        n = self.variable_count
        A = np.zeros((len(self.constraints), n))
        for i, con in enumerate(self.constraints):
            A[i, con.expression.indices] = con.expression.values
        b = np.array([c.rhs - c.expression.constant for c in self.constraints], dtype=float)
        rel = [c.relation for c in self.constraints]
        return A, rel, b, self.objective.to_dense(n), self.objective.constant


@dataclass
class LPSolution:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0
    phase1_iterations: int = 0
    bland_engaged: bool = False
    infeasibility: dict = field(default_factory=dict)


class _Tableau:
    """Dense simplex tableau; the last row holds reduced costs, the last column the rhs."""

    def __init__(self, T, basis):
        self.T = T
        self.basis = basis

    @property
    def m(self):
        return self.T.shape[0] - 1

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        for i in np.flatnonzero(col):
            if i != r:
                T[i] -= col[i] * T[r]
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j

    def price(self, ncols, eligible=None):
        """Reduced costs of the candidate columns (ineligible ones masked)."""
        r = self.T[-1, :ncols]
        if eligible is not None:
            r = np.where(eligible, r, 0.0)
        return r

    def run(self, ncols, max_iter, eligible=None):
        """Minimize; returns (status, iterations, bland_engaged)."""
        m = self.m
        stall_limit = STALL_FACTOR * (m + ncols)
        best = np.inf
        stalled = 0
        bland = False
        it = 0
        while True:
            r = self.price(ncols, eligible)
            if bland:
                cand = np.flatnonzero(r < -OPT_TOL)
                if cand.size == 0:
                    return OPTIMAL, it, bland
                j = int(cand[0])
            else:
                j = int(np.argmin(r))
                if r[j] >= -OPT_TOL:
                    return OPTIMAL, it, bland
            col = self.T[:m, j]
            pos = np.flatnonzero(col > PIVOT_TOL)
            if pos.size == 0:
                return UNBOUNDED, it, bland
            rhs = np.maximum(self.T[pos, -1], 0.0)
            ratios = rhs / col[pos]
            best_ratio = ratios.min()
            ties = pos[ratios <= best_ratio + 1e-12 * max(1.0, best_ratio)]
            leave = int(ties[np.argmin(self.basis[ties])])
            self.pivot(leave, j)
            it += 1
            if it > max_iter:
                raise RuntimeError(f"simplex exceeded {max_iter} iterations")
            obj = -self.T[-1, -1]
            if obj < best - OPT_TOL:
                best = obj
                stalled = 0
            else:
                stalled += 1
                if stalled > stall_limit:
                    bland = True


def _standard_form(A, rel, b):
    """Rows with non-negative rhs, slack/surplus columns appended."""
    A = A.copy()
    b = b.copy()
    rel = list(rel)
    for i in range(len(b)):
        if b[i] < 0:
            A[i] *= -1
            b[i] *= -1
            rel[i] = {"=": "=", "<=": ">=", ">=": "<="}[rel[i]]
    m, n = A.shape
    ineq = [i for i in range(m) if rel[i] != "="]
    S = np.zeros((m, len(ineq)))
    for k, i in enumerate(ineq):
        S[i, k] = 1.0 if rel[i] == "<=" else -1.0
    slack_of_row = {i: n + k for k, i in enumerate(ineq)}
    return np.hstack([A, S]), rel, b, slack_of_row


def simplex_solve(lp: LinearProgram, max_iter: int | None = None) -> LPSolution:
    """Two-phase dense tableau simplex.

    Dantzig pricing; after ``5 * (rows + cols)`` iterations without objective
    improvement the phase switches to Bland's rule, which cannot cycle.
    Infeasible and unbounded problems are reported through ``status``.
    """
    A, rel, b, c, c0 = lp.dense()
    if lp.sense == "maximize":
        c = -c
    m, n = A.shape
    Astd, rel, b, slack_of_row = _standard_form(A, rel, b)
    N = Astd.shape[1]
    if max_iter is None:
        max_iter = 50 * (m + N) + 1000

    need_art = [i for i in range(m) if rel[i] != "<="]
    art_col = {i: N + k for k, i in enumerate(need_art)}
    T = np.zeros((m + 1, N + len(need_art) + 1))
    T[:m, :N] = Astd
    T[:m, -1] = b
    basis = np.empty(m, dtype=np.int64)
    for i in range(m):
        if i in art_col:
            T[i, art_col[i]] = 1.0
            basis[i] = art_col[i]
        else:
            basis[i] = slack_of_row[i]
    rows = np.arange(m)  # original row of each tableau row

    tab = _Tableau(T, basis)
    p1_iters = 0
    bland1 = False
    if need_art:
        art_rows = np.array(need_art)
        T[-1, N:-1] = 1.0
        T[-1] -= T[art_rows].sum(axis=0)
        status, p1_iters, bland1 = tab.run(T.shape[1] - 1, max_iter)
        infeas = -T[-1, -1]
        if infeas > FEAS_TOL * max(1.0, float(np.abs(b).sum())):
            residual = {}
            for r, j in enumerate(tab.basis):
                if j >= N and T[r, -1] > FEAS_TOL:
                    residual[int(rows[r])] = float(T[r, -1])
            labels = {lp.constraints[i].label: v for i, v in residual.items()}
            return LPSolution(INFEASIBLE, iterations=p1_iters, phase1_iterations=p1_iters,
                              bland_engaged=bland1, infeasibility=labels)
        # drive zero-level artificials out of the basis; drop redundant rows
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if tab.basis[r] >= N:
                row = np.abs(T[r, :N])
                j = int(np.argmax(row))
                if row[j] > PIVOT_TOL:
                    tab.pivot(r, j)
                else:
                    keep[r] = False
        T = np.vstack([T[:m][keep], T[-1:]])
        tab = _Tableau(T, tab.basis[keep])
        rows = rows[keep]
    # phase 2 on the structural + slack columns only
    T = np.hstack([tab.T[:, :N], tab.T[:, -1:]])
    tab = _Tableau(T, tab.basis)
    cost = np.concatenate([c, np.zeros(N - n)])
    T[-1, :] = 0.0
    T[-1, :N] = cost
    T[-1] -= cost[tab.basis] @ T[:-1]
    status, p2_iters, bland2 = tab.run(N, max_iter)
    iters = p1_iters + p2_iters
    if status == UNBOUNDED:
        return LPSolution(UNBOUNDED, iterations=iters, phase1_iterations=p1_iters,
                          bland_engaged=bland1 or bland2)

    x = np.zeros(N)
    x[tab.basis] = T[:-1, -1]
    x = _polish(Astd[rows], b[rows], tab.basis, x)
    xs = np.clip(x[:n], 0.0, None)
    obj = float(lp.objective.to_dense(n) @ xs + c0)
    return LPSolution(OPTIMAL, xs, obj, iters, p1_iters, bland1 or bland2)


def _polish(A, b, basis, x):
    """Recompute basic values from the original rows to shed pivoting drift."""
    if len(basis) == 0:
        return x
    B = A[:, basis]
    try:
        if np.linalg.cond(B) > 1e12:
            return x
        xb = np.linalg.solve(B, b)
    except np.linalg.LinAlgError:
        return x
    if np.any(xb < -1e-9):
        return x
    out = np.zeros_like(x)
    out[basis] = np.clip(xb, 0.0, None)
    before = np.abs(A @ x - b).max()
    after = np.abs(A @ out - b).max()
    return out if after <= before else x


class LPBackend(Protocol):
    def solve(self, lp: LinearProgram) -> LPSolution: ...


class SimplexBackend:
    """The built-in reference solver."""

    def solve(self, lp: LinearProgram) -> LPSolution:
        return simplex_solve(lp)


class ScipyBackend:
    """HiGHS through scipy, for cross-checking large instances."""

    def solve(self, lp: LinearProgram) -> LPSolution:
        from scipy.optimize import linprog

        A, rel, b, c, c0 = lp.dense()
        sign = -1.0 if lp.sense == "maximize" else 1.0
        eq = [i for i, r in enumerate(rel) if r == "="]
        le = [i for i, r in enumerate(rel) if r == "<="]
        ge = [i for i, r in enumerate(rel) if r == ">="]
        A_ub = np.vstack([A[le], -A[ge]]) if le or ge else None
        b_ub = np.concatenate([b[le], -b[ge]]) if le or ge else None
        res = linprog(sign * c, A_ub=A_ub, b_ub=b_ub, A_eq=A[eq] if eq else None,
                      b_eq=b[eq] if eq else None, bounds=(0, None), method="highs")
        if res.status == 2:
            return LPSolution(INFEASIBLE)
        if res.status == 3:
            return LPSolution(UNBOUNDED)
        if res.status != 0:
            raise RuntimeError(res.message)
        x = np.clip(res.x, 0.0, None)
        return LPSolution(OPTIMAL, x, float(c @ x + c0), int(res.nit))


# ------------------------------------------------------------------- presolve


@dataclass
class _Reduction:
    """Maps a reduced LP back onto the original atoms."""

    representatives: np.ndarray  # original atom for each reduced variable
    fixed_zero: int
    aggregated: int


def _zero_fix(constraints, n):
    """Atoms forced to zero by ``sum(positive coefs) (=|<=) 0`` rows."""
    fixed = np.zeros(n, dtype=bool)
    changed = True
    while changed:
        changed = False
        for con in constraints:
            e = con.expression
            if con.relation in ("=", "<=") and con.rhs - e.constant == 0.0 and e.values.size \
                    and np.all(e.values > 0) and not fixed[e.indices].all():
                fixed[e.indices] = True
                changed = True
    return fixed


def _column_groups(exprs, free, n):
    """Group free atoms whose columns (over ``exprs``) are identical.

    Columns are hashed by two seeded random projections, then every group is
    verified exactly; on any mismatch no aggregation is done.
    """
    rng = np.random.default_rng(20240229)
    h = np.zeros((2, n))
    w = rng.uniform(0.5, 1.5, size=(2, len(exprs)))
    for k, e in enumerate(exprs):
        h[0, e.indices] += w[0, k] * e.values
        h[1, e.indices] += w[1, k] * e.values
    fidx = np.flatnonzero(free)
    keys = h[:, fidx]
    order = np.lexsort((fidx, keys[1], keys[0]))
    sk = keys[:, order]
    new = np.ones(order.size, dtype=bool)
    new[1:] = (sk[0, 1:] != sk[0, :-1]) | (sk[1, 1:] != sk[1, :-1])
    gid_sorted = np.cumsum(new) - 1
    group = np.full(n, -1, dtype=np.int64)
    group[fidx[order]] = gid_sorted
    G = int(gid_sorted[-1]) + 1 if order.size else 0
    size = np.bincount(group[fidx], minlength=G)
    for e in exprs:
        g = group[e.indices]
        sel = g >= 0
        g, v = g[sel], e.values[sel]
        cnt = np.bincount(g, minlength=G)
        hi = np.full(G, -np.inf)
        lo = np.full(G, np.inf)
        np.maximum.at(hi, g, v)
        np.minimum.at(lo, g, v)
        touched = cnt > 0
        if np.any(cnt[touched] != size[touched]) or np.any(hi[touched] != lo[touched]):
            return None
    reps = np.full(G, n, dtype=np.int64)
    np.minimum.at(reps, group[fidx], fidx)
    # order groups by representative so the reduced LP is deterministic
    perm = np.argsort(reps)
    remap = np.empty(G, dtype=np.int64)
    remap[perm] = np.arange(G)
    group[fidx] = remap[group[fidx]]
    return group, reps[perm]


def presolve(lp: LinearProgram, aggregate: bool = True):
    """Reduce ``lp``; returns (reduced lp or None if infeasible, reduction, infeasible labels)."""
    n = lp.variable_count
    fixed = _zero_fix(lp.constraints, n)
    free = ~fixed
    exprs = [c.expression for c in lp.constraints] + [lp.objective]
    grouping = _column_groups(exprs, free, n) if aggregate else None
    if grouping is None:
        group = np.full(n, -1, dtype=np.int64)
        reps = np.flatnonzero(free)
        group[reps] = np.arange(reps.size)
    else:
        group, reps = grouping

    def reduce(e):
        g = group[e.indices]
        sel = g >= 0
        g, v = g[sel], e.values[sel]
        # aggregated members share a coefficient: keep one per group
        uniq, first = np.unique(g, return_index=True)
        return LinearExpression(uniq, v[first], e.constant)

    cons, bad = [], {}
    for con in lp.constraints:
        e = reduce(con.expression)
        if len(e) == 0:
            lhs = e.constant
            ok = {"=": abs(lhs - con.rhs) <= FEAS_TOL, "<=": lhs <= con.rhs + FEAS_TOL,
                  ">=": lhs >= con.rhs - FEAS_TOL}[con.relation]
            if not ok:
                bad[con.label] = abs(lhs - con.rhs)
            continue
        cons.append(LinearConstraint(e, con.relation, con.rhs, con.label))
    red = _Reduction(reps, int(fixed.sum()), int(free.sum() - reps.size))
    if bad:
        return None, red, bad
    return LinearProgram(reduce(lp.objective), cons, max(int(reps.size), 1), lp.sense), red, {}


def _expand(red: _Reduction, y, n):
    psi = np.zeros(n)
    psi[red.representatives] = y[: red.representatives.size]
    return psi


# ---------------------------------------------------------------------- bounds


@dataclass
class Bounds:
    lower: float
    upper: float
    lower_witness: np.ndarray | None
    upper_witness: np.ndarray | None
    status: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, tol: float = 1e-7) -> bool:
        return self.status == OPTIMAL and self.lower - tol <= value <= self.upper + tol

    def as_record(self) -> dict:
        rec = {"lower": _num(self.lower), "upper": _num(self.upper), "status": self.status}
        rec.update({k: v for k, v in self.diagnostics.items() if k != "infeasibility"})
        if self.diagnostics.get("infeasibility"):
            rec["infeasibility"] = self.diagnostics["infeasibility"]
        return rec


def _num(v):
    return None if v is None or not np.isfinite(v) else float(v)


def solve_bounds(space_or_n, constraints: Sequence[LinearConstraint], objective: LinearExpression,
                 backend: LPBackend | None = None, presolve_lp: bool = True) -> Bounds:
    """Minimize and maximize ``objective`` subject to ``constraints``."""
    n = space_or_n if isinstance(space_or_n, (int, np.integer)) else space_or_n.atom_count
    backend = backend or SimplexBackend()
    lp = LinearProgram(objective, constraints, int(n))
    t0 = time.perf_counter()
    if presolve_lp:
        reduced, red, bad = presolve(lp)
    else:
        reduced, red, bad = lp, _Reduction(np.arange(n), 0, 0), {}
    diag = {"atoms": int(n), "constraints": len(lp.constraints)}
    if presolve_lp:
        diag.update(reduced_variables=int(red.representatives.size), fixed_zero=red.fixed_zero,
                    aggregated=red.aggregated)
    if reduced is None:
        diag["infeasibility"] = bad
        diag["runtime"] = time.perf_counter() - t0
        return Bounds(np.nan, np.nan, None, None, INFEASIBLE, diag)

    results = {}
    for sense in ("minimize", "maximize"):
        results[sense] = backend.solve(reduced.with_sense(sense))
    diag["iterations"] = {s[:3]: r.iterations for s, r in results.items()}
    diag["phase1_iterations"] = {s[:3]: r.phase1_iterations for s, r in results.items()}
    diag["bland_engaged"] = any(r.bland_engaged for r in results.values())
    statuses = {r.status for r in results.values()}
    if INFEASIBLE in statuses:
        diag["infeasibility"] = next(r.infeasibility for r in results.values() if r.status == INFEASIBLE)
        diag["runtime"] = time.perf_counter() - t0
        return Bounds(np.nan, np.nan, None, None, INFEASIBLE, diag)
    lo, hi = results["minimize"], results["maximize"]
    lw = _expand(red, lo.x, n) if lo.status == OPTIMAL else None
    uw = _expand(red, hi.x, n) if hi.status == OPTIMAL else None
    lower = objective.evaluate(lw) if lw is not None else -np.inf
    upper = objective.evaluate(uw) if uw is not None else np.inf
    status = OPTIMAL if statuses == {OPTIMAL} else UNBOUNDED
    diag["max_residual"] = max(
        max_residual(constraints, w) for w in (lw, uw) if w is not None
    ) if (lw is not None or uw is not None) else None
    diag["runtime"] = time.perf_counter() - t0
    return Bounds(lower, upper, lw, uw, status, diag)


# ------------------------------------------------------------------- LP dump

_HEADER = "# pidbounds-lp 1"


def _coef_str(e: LinearExpression) -> str:
    return " ".join(f"{int(i)}:{float(v)!r}" for i, v in zip(e.indices, e.values))


def _parse_coefs(text: str):
    idx, val = [], []
    for tok in text.split():
        i, _, v = tok.partition(":")
        idx.append(int(i))
        val.append(float(v))
    return np.array(idx, dtype=np.int64), np.array(val)


def dump_lp(lp: LinearProgram, path) -> None:
    """Plain-text LP: one tab-separated line per constraint (label, coefficients, relation, rhs).

    Coefficients are ``index:value`` pairs. The objective is the line whose
    label is ``objective``; its relation field is the sense and its rhs
    field the constant term.
    """
    lines = [_HEADER, f"# variables\t{lp.variable_count}"]
    lines.append("\t".join(["objective", _coef_str(lp.objective), lp.sense, repr(lp.objective.constant)]))
    for con in lp.constraints:
        e = con.expression
        rhs = con.rhs - e.constant
        lines.append("\t".join([con.label, _coef_str(e), con.relation, repr(rhs)]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_lp(path) -> LinearProgram:
    n = None
    objective, sense = None, "minimize"
    constraints = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].strip().split("\t")
                if parts[0] == "variables":
                    n = int(parts[1])
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ValueError(f"line {lineno}: expected 4 tab-separated fields")
            label, coefs, rel, rhs = fields
            idx, val = _parse_coefs(coefs)
            if label == "objective":
                objective = LinearExpression(idx, val, float(rhs))
                sense = rel
            else:
                constraints.append(LinearConstraint(LinearExpression(idx, val), rel, float(rhs), label))
    if n is None or objective is None:
        raise ValueError("LP file lacks a variable count or objective line")
    return LinearProgram(objective, constraints, n, sense)
