"""Latent-variable Bayesian networks and the linear (Fine) model class.

A network is a DAG over three kinds of vertices: observed variables,
unobserved variables of known cardinality we want to reason about
(``latent-target``), and exogenous confounders of unknown cardinality.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

OBSERVED = "observed"
LATENT_TARGET = "latent-target"
EXOGENOUS = "exogenous"
ROLES = (OBSERVED, LATENT_TARGET, EXOGENOUS)


class NetworkError(ValueError):
    pass


class NotInFineClassError(NetworkError):
    def __init__(self, message, vertex=None, report=None):
        super().__init__(message)
        self.vertex = vertex
        self.report = report


@dataclass(frozen=True)
class VariableSpec:
    name: str
    role: str = OBSERVED
    cardinality: int | None = None

    @property
    def is_exogenous(self) -> bool:
        return self.role == EXOGENOUS


@dataclass(frozen=True)
class NetworkSpec:
    variables: tuple[VariableSpec, ...]
    edges: tuple[tuple[str, str], ...] = ()
    # set by validate_network
    order: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def variable(self, name: str) -> VariableSpec:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def cardinality(self, name: str) -> int:
        card = self.variable(name).cardinality
        if card is None:
            raise NetworkError(f"variable {name!r} has no cardinality")
        return card

    def parents(self, name: str) -> list[str]:
        # declaration order, which fixes the parent-setting radix order
        ps = {p for p, c in self.edges if c == name}
        return [n for n in self.names if n in ps]

    def children(self, name: str) -> list[str]:
        cs = {c for p, c in self.edges if p == name}
        return [n for n in self.names if n in cs]

    def endogenous_parents(self, name: str) -> list[str]:
        return [p for p in self.parents(name) if not self.variable(p).is_exogenous]

    def descendants(self, name: str) -> set[str]:
        seen: set[str] = set()
        stack = self.children(name)
        while stack:
            v = stack.pop()
            if v not in seen:
                seen.add(v)
                stack.extend(self.children(v))
        return seen

    @property
    def exogenous(self) -> list[str]:
        return [v.name for v in self.variables if v.is_exogenous]

    @property
    def endogenous(self) -> list[str]:
        return [v.name for v in self.variables if not v.is_exogenous]

    def with_edges(self, edges: Iterable[tuple[str, str]], drop: Iterable[str] = ()):
        drop = set(drop)
        variables = tuple(v for v in self.variables if v.name not in drop)
        edges = tuple(e for e in edges if e[0] not in drop and e[1] not in drop)
        return NetworkSpec(variables, _dedupe(edges))


def _dedupe(edges):
    seen, out = set(), []
    for e in edges:
        if e not in seen:
            seen.add(e)
            out.append(e)
    return tuple(out)


def topological_order(spec: NetworkSpec) -> list[str]:
    """Kahn's algorithm with declaration-order tie-breaking."""
    names = spec.names
    indeg = {n: 0 for n in names}
    for _, c in spec.edges:
        indeg[c] += 1
    order = []
    ready = [n for n in names if indeg[n] == 0]
    while ready:
        n = ready.pop(0)
        order.append(n)
        for c in spec.children(n):
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
                ready.sort(key=names.index)
    if len(order) != len(names):
        stuck = [n for n in names if n not in order]
        raise NetworkError(f"cycle detected among {stuck}")
    return order


def validate_network(spec: NetworkSpec) -> NetworkSpec:
    names = spec.names
    seen = set()
    for v in spec.variables:
        if not v.name or not isinstance(v.name, str):
            raise NetworkError(f"invalid variable name {v.name!r}")
        if v.name in seen:
            raise NetworkError(f"duplicate variable name {v.name!r}")
        seen.add(v.name)
        if v.role not in ROLES:
            raise NetworkError(f"variable {v.name!r} has unknown role {v.role!r}")
        if v.is_exogenous:
            if v.cardinality is not None:
                raise NetworkError(f"exogenous variable {v.name!r} must not declare a cardinality")
        elif v.cardinality is None or int(v.cardinality) != v.cardinality or v.cardinality < 2:
            raise NetworkError(
                f"endogenous variable {v.name!r} needs an integer cardinality >= 2, got {v.cardinality!r}"
            )
    for p, c in spec.edges:
        for n in (p, c):
            if n not in seen:
                raise NetworkError(f"edge ({p}, {c}) references unknown variable {n!r}")
        if p == c:
            raise NetworkError(f"cycle detected: self-loop on {p!r}")
        if spec.variable(c).is_exogenous:
            raise NetworkError(f"exogenous variable {c!r} has parent {p!r}")
    order = topological_order(spec)
    return replace(spec, order=tuple(order))


@dataclass(frozen=True)
class FineWitness:
    """A confounder whose children absorb every descendant, plus the instruments.

    ``lambda_`` is ``None`` only for a network with no exogenous vertex and no
    edges, where every endogenous variable is treated as a child of an
    implicit confounder.
    """

    lambda_: str | None
    children: tuple[str, ...]
    instruments: tuple[str, ...]
    notes: tuple[str, ...] = ()

    is_fine = True


@dataclass(frozen=True)
class FineFailure:
    candidate: str
    condition: int
    vertex: str
    reason: str


@dataclass(frozen=True)
class NotFineReport:
    failures: tuple[FineFailure, ...]

    is_fine = False

    def __str__(self):
        if not self.failures:
            return "no exogenous variable to act as the common confounder"
        return "; ".join(
            f"{f.candidate}: condition {f.condition} fails at {f.vertex} ({f.reason})"
            for f in self.failures
        )


def _ensure_validated(spec: NetworkSpec) -> NetworkSpec:
    return spec if spec.order is not None else validate_network(spec)


def _check_candidate(spec: NetworkSpec, lam: str):
    children = spec.children(lam)
    desc = spec.descendants(lam)
    for d in spec.order:
        if d in desc and d not in children:
            return None, FineFailure(lam, 1, d, "descendant that is not a child")
    instruments = []
    for v in spec.order:
        if v == lam or v in desc:
            continue
        var = spec.variable(v)
        if var.role != OBSERVED:
            return None, FineFailure(lam, 2, v, f"non-descendant with role {var.role}")
        ch = spec.children(v)
        if len(ch) != 1:
            return None, FineFailure(lam, 2, v, f"non-descendant with {len(ch)} children")
        if ch[0] not in children:
            return None, FineFailure(lam, 2, v, f"child {ch[0]} is not a child of {lam}")
        instruments.append(v)
    notes = () if children else (f"{lam} has no children",)
    ordered_children = tuple(v for v in spec.order if v in children)
    return FineWitness(lam, ordered_children, tuple(instruments), notes), None


def check_fine_conditions(spec: NetworkSpec) -> FineWitness | NotFineReport:
    """Find the first exogenous vertex (declaration order) meeting Fine's conditions."""
    spec = _ensure_validated(spec)
    if not spec.exogenous and not spec.edges:
        return FineWitness(
            None,
            tuple(spec.order),
            (),
            ("no exogenous vertex and no edges: joint over all variables (outer)",),
        )
    failures = []
    for lam in spec.exogenous:
        witness, failure = _check_candidate(spec, lam)
        if witness is not None:
            return witness
        failures.append(failure)
    return NotFineReport(tuple(failures))


def _find_reduction(spec: NetworkSpec, protected):
    for u in spec.exogenous:
        kids = spec.children(u)
        if len(kids) != 2:
            continue
        for a, b in (kids, kids[::-1]):
            if a in protected or spec.variable(a).is_exogenous:
                continue
            if spec.parents(a) == [u] and set(spec.children(a)) <= {b}:
                return u, a, b
    return None


def apply_prop2_reductions(spec: NetworkSpec, protected=frozenset(), *, log=None) -> NetworkSpec:
    """Replace confounders of a parentless vertex and its only child by a direct edge.

    Repeats until no exogenous ``U`` with exactly two children ``A``, ``B``
    where ``Pa(A) = {U}`` and ``Ch(A)`` is a subset of ``{B}`` remains.
    """
    spec = _ensure_validated(spec)
    protected = set(protected)
    while (hit := _find_reduction(spec, protected)) is not None:
        u, a, b = hit
        added = (a, b) not in spec.edges
        spec = validate_network(spec.with_edges(list(spec.edges) + [(a, b)], drop=[u]))
        if log is not None:
            log.append({"removed_exogenous": u, "edge": (a, b), "edge_added": added})
    return spec


@dataclass(frozen=True)
class RelaxationReport:
    step1: tuple[dict, ...] = ()
    removed_edges: tuple[tuple[str, str], ...] = ()
    added_edges: tuple[tuple[str, str], ...] = ()
    removed_exogenous: tuple[str, ...] = ()
    new_confounder: str | None = None

    @property
    def sharp(self) -> bool:
        """True when only bound-preserving (step-1) rewrites were applied."""
        return not (self.removed_edges or self.added_edges or self.removed_exogenous)

    def as_dict(self) -> dict:
        return {
            "step1": [
                {**r, "edge": list(r["edge"])} for r in self.step1
            ],
            "removed_edges": [list(e) for e in self.removed_edges],
            "added_edges": [list(e) for e in self.added_edges],
            "removed_exogenous": list(self.removed_exogenous),
            "new_confounder": self.new_confounder,
            "sharp": self.sharp,
        }


def _fresh_name(spec: NetworkSpec, base="Lambda") -> str:
    name, k = base, 1
    while name in spec.names:
        k += 1
        name = f"{base}{k}"
    return name


def relax_to_linear(spec: NetworkSpec, protected=frozenset()) -> tuple[NetworkSpec, RelaxationReport]:
    """Rewrite ``spec`` into the Fine class, recording every relaxation made.

    Step 1 applies the confounded-instrument reductions (no change to the
    model). Step 2 replaces every remaining exogenous vertex by one fresh
    confounder pointing at each vertex that has a parent, which can only
    remove independences, so bounds on the result are outer bounds.
    """
    spec = _ensure_validated(spec)
    log: list[dict] = []
    reduced = apply_prop2_reductions(spec, protected, log=log)
    if check_fine_conditions(reduced).is_fine:
        return reduced, RelaxationReport(step1=tuple(log))

    targets = [v for v in reduced.order if reduced.parents(v)]
    old_exo = reduced.exogenous
    removed = tuple(e for e in reduced.edges if e[0] in old_exo)
    lam = _fresh_name(reduced)
    kept = [e for e in reduced.edges if e[0] not in old_exo]
    added = tuple((lam, v) for v in targets)
    variables = tuple(v for v in reduced.variables if v.name not in old_exo) + (
        VariableSpec(lam, EXOGENOUS),
    )
    relaxed = validate_network(NetworkSpec(variables, tuple(kept) + added))
    report = RelaxationReport(tuple(log), removed, added, tuple(old_exo), lam)

    result = check_fine_conditions(relaxed)
    if not result.is_fine:
        failure = next((f for f in result.failures if f.candidate == lam), None)
        vertex = failure.vertex if failure else None
        raise NotInFineClassError(
            f"relaxed network is still outside the linear class: {result}", vertex, report
        )
    return relaxed, report
