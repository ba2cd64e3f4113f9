"""Brute-force checks that share no machinery with the simplex.

* ``oracle_bounds``: exact LP optimum by enumerating basic solutions.
* ``parametric_chain_search``: grid search over the binary chain's parameters.
* ``generative_containment_trial``: sample a model, derive its observables,
  bound, and check the truth is inside.
* ``joint_iv_bounds``: bounds from the joint (A, X-profile, Y-profile)
  parameterization with explicit independence equalities.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .analytic import IntervalUnion
from .linear import LinearConstraint, LinearExpression, max_residual
from .solver import INFEASIBLE, OPTIMAL, UNBOUNDED, Bounds, LinearProgram, simplex_solve, solve_bounds

ORACLE_MAX_VARIABLES = 24
ORACLE_TOL = 1e-9
_BATCH = 20000


class OracleError(ValueError):
    pass


# ------------------------------------------------------------ vertex enumeration


def _rows(lp: LinearProgram):
    n = lp.variable_count
    eq, eq_b, ub, ub_b = [], [], [], []
    for con in lp.constraints:
        row = np.zeros(n)
        np.add.at(row, con.expression.indices, con.expression.values)
        rhs = con.rhs - con.expression.constant
        if con.relation == "=":
            eq.append(row), eq_b.append(rhs)
        elif con.relation == "<=":
            ub.append(row), ub_b.append(rhs)
        else:
            ub.append(-row), ub_b.append(-rhs)
    ub.extend(-np.eye(n))
    ub_b.extend([0.0] * n)
    return (np.array(eq).reshape(-1, n), np.array(eq_b), np.array(ub), np.array(ub_b))


def _obviously_bounded(lp: LinearProgram) -> bool:
    """True if some =/<= row with all-positive coefficients covers every variable."""
    for con in lp.constraints:
        e = con.expression
        if con.relation in ("=", "<=") and e.indices.size == lp.variable_count and np.all(e.values > 0):
            return True
    return False


def _combos(k, d):
    it = itertools.combinations(range(k), d)
    while True:
        chunk = list(itertools.islice(it, _BATCH))
        if not chunk:
            return
        yield np.array(chunk, dtype=np.int64).reshape(len(chunk), d)


def _vertices(G, h, tol):
    """All z with d linearly independent active rows of G z <= h that are feasible."""
    k, d = G.shape
    found = []
    for idx in _combos(k, d):
        M = G[idx]
        ok = np.linalg.cond(M) < 1e10
        if not ok.any():
            continue
        M, rhs = M[ok], h[idx[ok]]
        z = np.linalg.solve(M, rhs[..., None])[..., 0]
        feas = np.all(z @ G.T <= h + tol, axis=1)
        found.append(z[feas])
    return np.concatenate(found) if found else np.zeros((0, d))


def _rays(G, tol):
    """Extreme rays of {z : G z <= 0} (pointed cone)."""
    k, d = G.shape
    rays = []
    if d == 1:
        cands = np.array([[1.0], [-1.0]])
        return cands[np.all(cands @ G.T <= tol, axis=1)]
    for idx in _combos(k, d - 1):
        for sub in G[idx]:
            _, s, vt = np.linalg.svd(sub)
            if s[-1] < 1e-10 * max(s[0], 1.0):
                continue
            v = vt[-1]
            for r in (v, -v):
                if np.all(G @ r <= tol):
                    rays.append(r)
    return np.array(rays).reshape(-1, d)


def oracle_bounds(lp: LinearProgram, max_variables: int = ORACLE_MAX_VARIABLES,
                  tol: float = ORACLE_TOL) -> Bounds:
    """Exact min/max of ``lp.objective`` by enumerating every basic feasible solution."""
    n = lp.variable_count
    if n > max_variables:
        raise OracleError(f"dimension cap exceeded: {n} variables > {max_variables}")
    E, e, G, g = _rows(lp)
    c = np.zeros(n)
    np.add.at(c, lp.objective.indices, lp.objective.values)
    diag = {"variables": n}

    # parametrize the equality set as x = x0 + N z
    if E.shape[0]:
        x0 = np.linalg.lstsq(E, e, rcond=None)[0]
        if np.max(np.abs(E @ x0 - e)) > 1e-8:
            return Bounds(np.nan, np.nan, None, None, INFEASIBLE, {**diag, "reason": "equalities inconsistent"})
        _, s, vt = np.linalg.svd(E)
        rank = int(np.sum(s > 1e-10 * max(s[0], 1.0)))
        N = vt[rank:].T
    else:
        x0, N = np.zeros(n), np.eye(n)
    Gz, hz = G @ N, g - G @ x0
    d = N.shape[1]
    diag["free_dimension"] = d

    if d == 0:
        Z = np.zeros((1, 0)) if np.all(hz >= -tol) else np.zeros((0, 0))
    else:
        Z = _vertices(Gz, hz, tol)
    if Z.shape[0] == 0:
        return Bounds(np.nan, np.nan, None, None, INFEASIBLE, {**diag, "reason": "no vertex found"})
    X = x0 + Z @ N.T
    vals = X @ c + lp.objective.constant
    diag["vertices"] = int(X.shape[0])
    lo_i, hi_i = int(np.argmin(vals)), int(np.argmax(vals))
    lower, upper = float(vals[lo_i]), float(vals[hi_i])
    status = OPTIMAL
    if d and not _obviously_bounded(lp):
        cz = N.T @ c
        R = _rays(Gz, tol)
        if R.size:
            slopes = R @ cz
            if np.any(slopes < -1e-9):
                lower, status = -np.inf, UNBOUNDED
            if np.any(slopes > 1e-9):
                upper, status = np.inf, UNBOUNDED
    clip = lambda x: np.where(np.abs(x) < 1e-12, 0.0, x)
    return Bounds(lower, upper, clip(X[lo_i]), clip(X[hi_i]), status, diag)


def compare_bounds(a: Bounds, b: Bounds, tol: float = 1e-6) -> bool:
    if a.status != b.status:
        return False
    if a.status != OPTIMAL:
        return True
    return abs(a.lower - b.lower) <= tol and abs(a.upper - b.upper) <= tol


# ------------------------------------------------------ binary chain A -> X -> Y

CHAIN_RESTRICTIONS = (None, "A1", "A3", "label_independent")


def _axis(lo, hi, step, include_hi=True):
    n = int(round((hi - lo) / step))
    pts = lo + step * np.arange(n + 1)
    pts = pts[pts <= hi + 1e-15]
    if not include_hi:
        pts = pts[pts < hi - 1e-15]
    return pts


def _q_grid(restriction, step, center=None, radius=None):
    """Candidate (q10, q11) pairs, optionally around ``center``."""
    def rng1(lo, hi, c, open_hi=False):
        if c is not None:
            lo, hi = max(lo, c - radius), min(hi, c + radius)
        if lo > hi:
            return np.zeros(0)
        return _axis(lo, hi, step, include_hi=not open_hi)

    if restriction is None:
        a = rng1(0.0, 1.0, center and center[0])
        b = rng1(0.0, 1.0, center and center[1])
    elif restriction == "A1":
        a = np.zeros(1)
        b = rng1(0.0, 1.0, center and center[1])
    elif restriction == "A3":
        a = rng1(0.0, 0.5, center and center[0], open_hi=True)
        b = rng1(0.0, 1.0, center and center[1])
    elif restriction == "label_independent":
        e = rng1(0.0, 1.0, center and center[0])
        return e, 1.0 - e
    else:
        raise ValueError(f"unknown restriction {restriction!r}")
    q10, q11 = np.meshgrid(a, b, indexing="ij")
    return q10.ravel(), q11.ravel()


def _chain_values(q10, q11, p1, p1a, tol):
    """P(X=1) and the branch sign for every feasible (q10, q11)."""
    diff = q11 - q10
    ok = np.abs(diff) > 1e-12
    q10, q11, diff = q10[ok], q11[ok], diff[ok]
    # pi_a solves p1|a = q10 (1 - pi_a) + q11 pi_a
    pi = (p1a[None, :] - q10[:, None]) / diff[:, None]
    feas = np.all((pi >= -tol) & (pi <= 1 + tol), axis=1)
    px = (p1 - q10[feas]) / diff[feas]
    return px, np.sign(diff[feas]), q10[feas], q11[feas]


def parametric_chain_search(p_y, p_y_given_a, restriction: str | None = None,
                            resolution: float = 1e-3, refine: int = 3,
                            merge: bool = True) -> IntervalUnion:
    """Inner approximation of the identified set of P(X=1) by grid search.

    Scans the misclassification probabilities q10 = P(Y=1|X=0) and
    q11 = P(Y=1|X=1) at step ``resolution``; each pair pins the per-arm
    P(X=1|A=a), kept when all lie in [0, 1]. Extreme points of each label
    branch are then re-searched on finer local grids ``refine`` times.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    from .analytic import _inputs

    p1, p1a = _inputs(p_y, p_y_given_a)
    tol = 1e-12
    px, sign, q10, q11 = _chain_values(*_q_grid(restriction, resolution), p1, p1a, tol)
    branches = {}
    for s in (1.0, -1.0):
        sel = sign == s
        if sel.any():
            branches[s] = [px[sel], q10[sel], q11[sel]]
    step = resolution
    for _ in range(refine):
        radius, step = 2 * step, step / 10
        for s, (v, a, b) in branches.items():
            for i in (int(np.argmin(v)), int(np.argmax(v))):
                center = (a[i], b[i])
                nv, ns, na, nb = _chain_values(*_q_grid(restriction, step, center, radius), p1, p1a, tol)
                keep = ns == s
                branches[s] = [np.concatenate([x, y[keep]]) for x, y in zip(branches[s], (nv, na, nb))]
                v, a, b = branches[s]
    ivs = [(v.min(), v.max()) for v, _, _ in branches.values()]
    return IntervalUnion.of(ivs, merge)


@dataclass(frozen=True)
class ChainSample:
    p_a: np.ndarray
    q10: float
    q11: float
    pi: np.ndarray  # P(X=1 | A=a)

    @property
    def p1_given_a(self) -> np.ndarray:
        return self.q10 * (1 - self.pi) + self.q11 * self.pi

    @property
    def p1(self) -> float:
        return float(self.p_a @ self.p1_given_a)

    @property
    def px1(self) -> float:
        return float(self.p_a @ self.pi)


def sample_chain(rng: np.random.Generator, n_arms: int = 2, restriction: str | None = None) -> ChainSample:
    """Random binary chain A -> X -> Y obeying ``restriction``."""
    p_a = rng.dirichlet(np.ones(n_arms))
    pi = rng.uniform(size=n_arms)
    if restriction is None:
        q10, q11 = rng.uniform(size=2)
    elif restriction == "A1":
        q10, q11 = 0.0, rng.uniform()
    elif restriction == "A3":
        q10, q11 = rng.uniform(0, 0.5), rng.uniform()
    elif restriction == "label_independent":
        q10 = rng.uniform()
        q11 = 1.0 - q10
    else:
        raise ValueError(f"unknown restriction {restriction!r}")
    return ChainSample(p_a, float(q10), float(q11), pi)


# ------------------------------------------------------- generative containment


@dataclass
class TrialRecord:
    seed: int
    status: str  # pass | fail | infeasible | sampler_failed
    truth: float | None = None
    lower: float | None = None
    upper: float | None = None
    sampler_violates_assumptions: bool = False
    bounds: Bounds | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def sample_psi(space, constraints, rng: np.random.Generator, n_vertices: int = 6):
    """Random feasible psi: a Dirichlet mixture of LP vertices for random objectives.

    With only the sum-to-one constraint the draw is Dirichlet on the simplex.
    """
    n = space.atom_count
    if all(c.label == "PROB" for c in constraints):
        return rng.dirichlet(np.ones(n))
    verts = []
    for _ in range(n_vertices):
        c = rng.normal(size=n)
        lp = LinearProgram(LinearExpression.from_dense(c), constraints, n)
        sol = simplex_solve(lp)
        if sol.status == OPTIMAL:
            verts.append(np.clip(sol.x, 0, None))
    if not verts:
        return None
    w = rng.dirichlet(np.ones(len(verts)))
    psi = w @ np.array(verts)
    return psi / psi.sum()


def generative_containment_trial(network, assumptions, target, seed: int, *,
                                 sampler_assumptions=None, instrument_marginal=None,
                                 tol: float = 1e-7) -> TrialRecord:
    """Sample a model obeying ``sampler_assumptions`` and check the bounds contain its truth.

    ``sampler_assumptions`` defaults to ``assumptions``. When the sampler
    ignores assumptions that the pipeline imposes, failures are flagged via
    ``sampler_violates_assumptions``.
    """
    from .constraints import compile_assumption, compile_observed, compile_probability, observed_from_psi
    from .pipeline import prepare_network
    from .response import ResponseSpace
    from .targets import build_target

    rng = np.random.default_rng(seed)
    net, witness, _ = prepare_network(network, target.protected)
    space = ResponseSpace(net, witness)
    if instrument_marginal is None:
        arms = space.arms()
        p = rng.dirichlet(np.ones(len(arms)))
        instrument_marginal = {a: float(v) for a, v in zip(arms, p)}
    sampler_assumptions = assumptions if sampler_assumptions is None else sampler_assumptions
    sampler_cons = compile_probability(space)
    for a in sampler_assumptions:
        sampler_cons += compile_assumption(space, a, instrument_marginal)
    psi = sample_psi(space, sampler_cons, rng)
    if psi is None:
        return TrialRecord(seed, "sampler_failed")
    data = observed_from_psi(space, psi, instrument_marginal)
    cons = compile_probability(space) + compile_observed(space, data)
    assumption_cons = []
    for a in assumptions:
        assumption_cons += compile_assumption(space, a, data)
    cons += assumption_cons
    violates = bool(assumption_cons) and max_residual(assumption_cons, psi) > 1e-9
    objective = build_target(space, data, target)
    truth = objective.evaluate(psi)
    b = solve_bounds(space, cons, objective)
    if b.status != OPTIMAL:
        return TrialRecord(seed, "infeasible", truth, None, None, violates, b)
    ok = b.lower - tol <= truth <= b.upper + tol
    return TrialRecord(seed, "pass" if ok else "fail", truth, b.lower, b.upper, violates, b)


# --------------------------------------------------- joint IV parameterization


def joint_iv_bounds(p_a, p_y_given_a, x_card: int, y_card: int, target: str = "mean_x",
                    monotone_x: bool = False, monotone_y: bool = False) -> Bounds:
    """Bounds for the IV model A -> X -> Y with the instrument kept as an LP variable."""
    return solve_bounds(*joint_iv_lp(p_a, p_y_given_a, x_card, y_card, target, monotone_x, monotone_y))


def joint_iv_lp(p_a, p_y_given_a, x_card: int, y_card: int, target: str = "mean_x",
                monotone_x: bool = False, monotone_y: bool = False):
    """Variable count, constraints and objective of the joint IV program.

    Variables are q(a, xt, yt) where xt is X's response to each value of A
    and yt is Y's response to each value of X. The instrument's independence
    from the responses is imposed as q(a, r) = P(a) * sum_a' q(a', r).
    ``target`` is ``mean_x`` (factual E[X]) or ``ate`` (E[X(1) - X(0)]).
    """
    p_a = np.asarray(p_a, dtype=float)
    cond = [np.asarray(c, dtype=float) for c in p_y_given_a]
    na = p_a.size
    xts = list(itertools.product(range(x_card), repeat=na))
    yts = list(itertools.product(range(y_card), repeat=x_card))
    cells = [(a, xt, yt) for a in range(na) for xt in xts for yt in yts]
    index = {cell: i for i, cell in enumerate(cells)}
    n = len(cells)
    cons = [LinearConstraint(LinearExpression(np.arange(n), np.ones(n)), "=", 1.0, "PROB")]
    for xt in xts:
        for yt in yts:
            idx = [index[(a, xt, yt)] for a in range(na)]
            for a in range(na):
                coef = {i: -p_a[a] for i in idx}
                coef[index[(a, xt, yt)]] += 1.0
                cons.append(LinearConstraint(LinearExpression.from_dict(coef), "=", 0.0, f"IND#a={a}"))
    for a in range(na):
        for y in range(y_card):
            idx = [index[(a, xt, yt)] for xt in xts for yt in yts if yt[xt[a]] == y]
            cons.append(LinearConstraint(LinearExpression(idx, np.ones(len(idx))), "=",
                                         p_a[a] * cond[a][y], f"OBS#a={a},y={y}"))
    bad = []
    for i, (a, xt, yt) in enumerate(cells):
        if monotone_x and any(xt[s] > xt[t] for s in range(na) for t in range(s + 1, na)):
            bad.append(i)
        if monotone_y and any(yt[s] > yt[t] for s in range(x_card) for t in range(s + 1, x_card)):
            bad.append(i)
    if bad:
        bad = sorted(set(bad))
        cons.append(LinearConstraint(LinearExpression(bad, np.ones(len(bad))), "=", 0.0, "MONO"))
    obj = np.zeros(n)
    for i, (a, xt, yt) in enumerate(cells):
        if target == "mean_x":
            obj[i] = xt[a]
        elif target == "ate":
            obj[i] = xt[1] - xt[0]
        else:
            raise ValueError(f"unknown target {target!r}")
    return n, cons, LinearExpression.from_dense(obj)
