"""Response-function parameterization of a Fine-class network.

An atom fixes, for every child of the confounder, the value it takes under
each joint setting of its endogenous parents. Atoms are indexed densely by a
mixed-radix code: the most significant digit is the first child's response
to its first parent setting, then that child's later settings, then the
next child, and so on. Each digit ranges over the child's values.

Parent settings of a child are themselves mixed-radix over its endogenous
parents in declaration order, first parent most significant.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .linear import LinearExpression
from .model import FineWitness, NetworkError, NetworkSpec, validate_network

DEFAULT_ATOM_CAP = 10**7


class ProblemTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class ChildResponse:
    name: str
    cardinality: int
    parents: tuple[str, ...]
    parent_cards: tuple[int, ...]
    offset: int  # index of this child's first digit

    @property
    def settings(self) -> int:
        return int(np.prod(self.parent_cards, dtype=np.int64)) if self.parent_cards else 1

    @property
    def profile_count(self) -> int:
        return self.cardinality**self.settings

    def setting_index(self, parent_values) -> int:
        s = 0
        for v, card in zip(parent_values, self.parent_cards):
            s = s * card + int(v)
        return s


class ResponseSpace:
    """Enumeration of joint response profiles for the confounder's children."""

    def __init__(self, network: NetworkSpec, witness: FineWitness, atom_cap: int = DEFAULT_ATOM_CAP):
        if network.order is None:
            network = validate_network(network)
        self.network = network
        self.witness = witness
        self.instruments = tuple(witness.instruments)
        self.instrument_cards = tuple(network.cardinality(a) for a in self.instruments)
        children = []
        offset = 0
        for name in witness.children:
            parents = tuple(network.endogenous_parents(name))
            for p in parents:
                if p not in witness.children and p not in self.instruments:
                    raise NetworkError(f"parent {p!r} of {name!r} is neither a child nor an instrument")
            child = ChildResponse(
                name,
                network.cardinality(name),
                parents,
                tuple(network.cardinality(p) for p in parents),
                offset,
            )
            offset += child.settings
            children.append(child)
        self.children = tuple(children)
        self.child_index = {c.name: i for i, c in enumerate(self.children)}
        self.radices = np.array(
            [c.cardinality for c in self.children for _ in range(c.settings)], dtype=np.int64
        )
        count = 1
        for r in self.radices:
            count *= int(r)
            if count > atom_cap:
                raise ProblemTooLarge(
                    f"problem too large: response space exceeds the cap of {atom_cap} atoms"
                )
        self.atom_count = count
        # stride of digit k = product of radices of the less significant digits
        strides = np.ones(len(self.radices), dtype=np.int64)
        for k in range(len(self.radices) - 2, -1, -1):
            strides[k] = strides[k + 1] * self.radices[k + 1]
        self.strides = strides
        self._atoms = None

    @property
    def n_digits(self) -> int:
        return len(self.radices)

    @property
    def atoms(self) -> np.ndarray:
        if self._atoms is None:
            self._atoms = np.arange(self.atom_count, dtype=np.int64)
        return self._atoms

    @property
    def profile_counts(self) -> dict[str, int]:
        return {c.name: c.profile_count for c in self.children}

    @property
    def endogenous(self) -> tuple[str, ...]:
        return self.instruments + tuple(c.name for c in self.children)

    def cardinality(self, name: str) -> int:
        return self.network.cardinality(name)

    def encode(self, profiles) -> int:
        """Profiles (one tuple per child, indexed by parent setting) to atom index."""
        if len(profiles) != len(self.children):
            raise ValueError("need one profile per child")
        digits = [int(v) for prof, c in zip(profiles, self.children) for v in _check_profile(prof, c)]
        return int(np.dot(digits, self.strides)) if digits else 0

    def decode(self, atom: int) -> tuple[tuple[int, ...], ...]:
        if not 0 <= atom < self.atom_count:
            raise IndexError(f"atom {atom} out of range [0, {self.atom_count})")
        digits = [int(d) for d in (atom // self.strides) % self.radices]
        return tuple(
            tuple(digits[c.offset : c.offset + c.settings]) for c in self.children
        )

    def digit(self, child: str, setting: int, atoms=None) -> np.ndarray:
        """Value of ``child`` at parent setting ``setting`` for each atom."""
        c = self.children[self.child_index[child]]
        k = c.offset + setting
        atoms = self.atoms if atoms is None else atoms
        return (atoms // self.strides[k]) % self.radices[k]

    def arms(self) -> list[tuple[int, ...]]:
        return list(itertools.product(*(range(k) for k in self.instrument_cards)))

    def propagate_all(self, instrument_values: Mapping[str, int] | None = None,
                      intervention: Mapping[str, int] | None = None, atoms=None) -> dict:
        """Structural propagation for every atom at once.

        Returns a dict mapping each endogenous variable to an int array over
        ``atoms`` (default: all atoms).
        """
        instrument_values = dict(instrument_values or {})
        intervention = dict(intervention or {})
        atoms = self.atoms if atoms is None else np.asarray(atoms, dtype=np.int64)
        for name, value in intervention.items():
            if name not in self.network.names:
                raise NetworkError(f"intervention on unknown variable {name!r}")
            if self.network.variable(name).is_exogenous:
                raise NetworkError(f"cannot intervene on exogenous variable {name!r}")
            if name not in self.endogenous:
                raise NetworkError(f"variable {name!r} is not part of the response space")
            _check_value(self, name, value)
        shape = atoms.shape
        values: dict[str, np.ndarray] = {}
        for a in self.instruments:
            if a in intervention:
                v = intervention[a]
            elif a in instrument_values:
                v = instrument_values[a]
            else:
                raise ValueError(f"no value supplied for instrument {a!r}")
            _check_value(self, a, v)
            values[a] = np.full(shape, int(v), dtype=np.int64)
        for c in self.children:
            if c.name in intervention:
                values[c.name] = np.full(shape, int(intervention[c.name]), dtype=np.int64)
                continue
            setting = np.zeros(shape, dtype=np.int64)
            for p, card in zip(c.parents, c.parent_cards):
                setting = setting * card + values[p]
            k = c.offset + setting
            values[c.name] = (atoms // self.strides[k]) % self.radices[k]
        return values

    def __repr__(self):
        counts = ", ".join(f"{c.name}:{c.profile_count}" for c in self.children)
        return f"ResponseSpace(atoms={self.atom_count}, profiles=[{counts}], instruments={self.instruments})"


def _check_profile(profile, child):
    profile = tuple(profile)
    if len(profile) != child.settings:
        raise ValueError(f"profile for {child.name} needs {child.settings} entries")
    for v in profile:
        if not 0 <= int(v) < child.cardinality:
            raise ValueError(f"value {v} out of range for {child.name}")
    return profile


def _check_value(space, name, value):
    card = space.cardinality(name)
    if not 0 <= int(value) < card:
        raise ValueError(f"value {value} out of range for {name!r} (cardinality {card})")


def enumerate_response_space(spec: NetworkSpec, witness: FineWitness,
                             atom_cap: int = DEFAULT_ATOM_CAP) -> ResponseSpace:
    return ResponseSpace(spec, witness, atom_cap)


def propagate(space: ResponseSpace, atom: int, instrument_values=None, intervention=None) -> dict[str, int]:
    if not 0 <= atom < space.atom_count:
        raise IndexError(f"atom {atom} out of range")
    vals = space.propagate_all(instrument_values, intervention, atoms=np.array([atom]))
    return {k: int(v[0]) for k, v in vals.items()}


Event = Mapping[str, int] | Callable[[dict], np.ndarray]


def event_mask(space: ResponseSpace, values: dict, event: Event) -> np.ndarray:
    """Boolean mask of atoms whose propagated assignment satisfies ``event``.

    ``event`` is either a mapping (a conjunction of equalities; empty means
    TRUE) or a vectorized predicate receiving the propagated value arrays.
    """
    n = next(iter(values.values())).shape if values else space.atoms.shape
    if callable(event):
        mask = np.asarray(event(values), dtype=bool)
        return np.broadcast_to(mask, n)
    mask = np.ones(n, dtype=bool)
    for name, v in event.items():
        if name not in values:
            raise KeyError(f"event references {name!r}, which is not in the response space")
        mask &= values[name] == int(v)
    return mask


def event_expression(space: ResponseSpace, instrument_values=None, intervention=None,
                     event: Event = None) -> LinearExpression:
    """0/1 expression that evaluates to P(event | instruments, do(intervention))."""
    values = space.propagate_all(instrument_values, intervention)
    return LinearExpression.from_mask(event_mask(space, values, event or {}))
