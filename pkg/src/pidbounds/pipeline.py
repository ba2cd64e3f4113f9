"""From a parsed model to bound records: graph preparation, compilation, sweeps."""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass, field

import numpy as np

from .constraints import (
    ObservedData,
    compile_assumption,
    compile_observed,
    compile_probability,
)
from .linear import LinearConstraint, LinearExpression
from .model import (
    FineWitness,
    NetworkSpec,
    NotInFineClassError,
    RelaxationReport,
    apply_prop2_reductions,
    check_fine_conditions,
    relax_to_linear,
    validate_network,
)
from .response import DEFAULT_ATOM_CAP, ResponseSpace
from .solver import OPTIMAL, Bounds, LinearProgram, solve_bounds
from .targets import TargetSpec, build_target


def prepare_network(network: NetworkSpec, protected=frozenset(), relax: bool = False
                    ) -> tuple[NetworkSpec, FineWitness, RelaxationReport]:
    """Validate, reduce confounded instruments if needed, and optionally relax.

    Raises NotInFineClassError when the graph is outside the class and
    ``relax`` is off.
    """
    net = validate_network(network)
    res = check_fine_conditions(net)
    if res.is_fine:
        return net, res, RelaxationReport()
    log: list[dict] = []
    reduced = apply_prop2_reductions(net, protected, log=log)
    res = check_fine_conditions(reduced)
    if res.is_fine:
        return reduced, res, RelaxationReport(step1=tuple(log))
    if not relax:
        vertex = res.failures[0].vertex if res.failures else None
        raise NotInFineClassError(f"graph is not in the Fine class: {res}", vertex, res)
    relaxed, report = relax_to_linear(net, protected)
    return relaxed, check_fine_conditions(relaxed), report


@dataclass
class SweepPlan:
    """Assumption subsets (by name) crossed with values of one parameter path."""

    subsets: list[list[str]] | None = None
    parameter: str | None = None
    values: list[float] | None = None

    def points(self, assumptions: list[dict]) -> list[tuple[list[str], float | None]]:
        names = [a["name"] for a in assumptions]
        subsets = self.subsets if self.subsets is not None else [names]
        values = self.values if self.parameter else [None]
        return [(list(s), v) for s in subsets for v in values]


@dataclass
class Model:
    network: NetworkSpec
    data: ObservedData | None
    assumptions: list[dict]
    target: TargetSpec
    sweep: SweepPlan = field(default_factory=SweepPlan)
    relax: bool = False
    atom_cap: int = DEFAULT_ATOM_CAP
    source: str | None = None


@dataclass
class Problem:
    space: ResponseSpace
    constraints: list[LinearConstraint]
    objective: LinearExpression
    report: RelaxationReport
    subset: list[str]
    parameter: str | None = None
    value: float | None = None

    def lp(self, sense: str = "minimize") -> LinearProgram:
        return LinearProgram(self.objective, self.constraints, self.space.atom_count, sense)


def _apply_parameter(assumptions, path, value):
    """Set ``name.param`` (or ``name.slack``) to ``value`` on a copy."""
    name, _, key = path.partition(".")
    out = copy.deepcopy(assumptions)
    hit = [a for a in out if a["name"] == name]
    if not hit or not key:
        raise KeyError(f"sweep parameter {path!r} does not name an assumption parameter")
    for a in hit:
        if key in ("slack", "level"):
            a[key] = value
        else:
            a.setdefault("params", {})[key] = value
    return out


class ModelContext:
    """Space, data constraints and objective shared by every sweep point."""

    def __init__(self, model: Model):
        self.model = model
        net, witness, report = prepare_network(model.network, model.target.protected, model.relax)
        self.report = report
        self.space = ResponseSpace(net, witness, model.atom_cap)
        self.base = compile_probability(self.space)
        if model.data is not None:
            self.base += compile_observed(self.space, model.data)
        self.objective = build_target(self.space, model.data, model.target)

    def problem(self, subset, parameter=None, value=None) -> Problem:
        assumptions = self.model.assumptions
        if parameter is not None:
            assumptions = _apply_parameter(assumptions, parameter, value)
        known = {a["name"] for a in assumptions}
        missing = [s for s in subset if s not in known]
        if missing:
            raise KeyError(f"sweep subset names unknown assumptions: {missing}")
        cons = list(self.base)
        for a in assumptions:
            if a["name"] in subset:
                cons += compile_assumption(self.space, a, self.model.data)
        return Problem(self.space, cons, self.objective, self.report, list(subset), parameter, value)


def solve_problem(problem: Problem, verify: str | None = None) -> tuple[dict, Bounds]:
    """Solve one sweep point and return its output record and raw bounds."""
    t0 = time.perf_counter()
    b = solve_bounds(problem.space, problem.constraints, problem.objective)
    rec = {
        "subset": "+".join(problem.subset) if problem.subset else "none",
        "assumptions": problem.subset,
        "parameter": problem.parameter,
        "value": problem.value,
        "lower": _num(b.lower),
        "upper": _num(b.upper),
        "status": b.status,
        "runtime": time.perf_counter() - t0,
        "iterations": b.diagnostics.get("iterations"),
        "atoms": problem.space.atom_count,
        "reduced_variables": b.diagnostics.get("reduced_variables"),
        "max_residual": b.diagnostics.get("max_residual"),
        "sharp": problem.report.sharp,
    }
    if b.diagnostics.get("infeasibility"):
        rec["infeasibility"] = b.diagnostics["infeasibility"]
    if verify == "oracle":
        from .oracle import OracleError, compare_bounds, oracle_bounds

        try:
            ob = oracle_bounds(problem.lp())
            rec["oracle_agrees"] = compare_bounds(b, ob)
            rec["oracle"] = {"lower": _num(ob.lower), "upper": _num(ob.upper), "status": ob.status}
        except OracleError as exc:
            rec["oracle_agrees"] = None
            rec["oracle_error"] = str(exc)
    return rec, b


def _num(v):
    return None if v is None or not np.isfinite(v) else float(v)


def witness_record(space: ResponseSpace, psi) -> dict:
    """Sparse witness: atom index, mass and decoded response profiles."""
    if psi is None:
        return None
    idx = np.flatnonzero(psi > 1e-12)
    return {
        "atoms": [int(i) for i in idx],
        "mass": [float(psi[i]) for i in idx],
        "profiles": [[list(p) for p in space.decode(int(i))] for i in idx],
    }


def run(model: Model, verify: str | None = None, jobs: int = 1, witnesses: bool = False,
        dump_lp: str | None = None) -> list[dict]:
    """Solve every sweep point; records come back in sweep order."""
    ctx = ModelContext(model)
    points = model.sweep.points(model.assumptions)
    problems = [ctx.problem(s, model.sweep.parameter, v) for s, v in points]
    if dump_lp:
        from .solver import dump_lp as _dump

        for i, p in enumerate(problems):
            path = dump_lp if len(problems) == 1 else _indexed(dump_lp, i)
            _dump(p.lp(), path)
    if jobs > 1 and len(problems) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_solve_for_pool, problems, [verify] * len(problems)))
    else:
        results = [solve_problem(p, verify) for p in problems]
    records = []
    for i, (rec, b) in enumerate(results):
        rec = {"index": i, "target": model.target.describe(), **rec}
        if not problems[i].report.sharp:
            rec["relaxation"] = problems[i].report.as_dict()
        if witnesses:
            rec["_witnesses"] = {
                "lower": witness_record(ctx.space, b.lower_witness),
                "upper": witness_record(ctx.space, b.upper_witness),
            }
        records.append(rec)
    return records


def _solve_for_pool(problem, verify):
    return solve_problem(problem, verify)


def _indexed(path: str, i: int) -> str:
    stem, dot, ext = path.rpartition(".")
    return f"{stem}-{i}.{ext}" if dot else f"{path}-{i}"
