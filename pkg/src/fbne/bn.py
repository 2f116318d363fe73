"""Discrete Bayesian networks: representation, joint probability, sampling."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .table import DataTable, Variable

CPT_TOLERANCE = 1e-9

# Parent index tuples per variable, aligned with a variable ordering.
Structure = tuple[tuple[int, ...], ...]


class InvalidQueryError(ValueError):
    """Unknown variable or state in a query."""


class ZeroEvidenceError(ValueError):
    """The evidence has probability zero under the network."""


class CycleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Cpt:
    """P(child | parents) as an array of shape ``(*parent_cards, child_card)``."""

    child: Variable
    parents: tuple[Variable, ...]
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        shape = tuple(p.cardinality for p in self.parents) + (self.child.cardinality,)
        if table.size != int(np.prod(shape)):
            raise ValueError(
                f"CPT for {self.child.name!r} has {table.size} entries, expected shape {shape}"
            )
        table = table.reshape(shape)
        if np.any(table < 0):
            raise ValueError(f"CPT for {self.child.name!r} has negative entries")
        sums = table.sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > CPT_TOLERANCE):
            raise ValueError(f"CPT rows for {self.child.name!r} do not sum to 1")
        table.setflags(write=False)
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "table", table)

    def row(self, parent_states: Sequence[str] = ()) -> np.ndarray:
        idx = tuple(p.index(s) for p, s in zip(self.parents, parent_states, strict=True))
        return self.table[idx]


def topological_order(parents: Structure) -> list[int]:
    """Kahn's algorithm; lowest index first among ready nodes."""
    n = len(parents)
    indeg = [len(set(p)) for p in parents]
    children = [[] for _ in range(n)]
    for i, ps in enumerate(parents):
        for p in set(ps):
            children[p].append(i)
    ready = sorted(i for i in range(n) if indeg[i] == 0)
    order = []
    while ready:
        i = ready.pop(0)
        order.append(i)
        for c in children[i]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
        ready.sort()
    if len(order) != n:
        raise CycleError("structure contains a directed cycle")
    return order


class BayesianNetwork:
    """A DAG over discrete variables with one CPT per node.

    Build it from CPTs; the variable order is the CPT order. Instances are
    treated as immutable.
    """

    def __init__(self, cpts: Sequence[Cpt]):
        self.cpts: tuple[Cpt, ...] = tuple(cpts)
        self.variables: tuple[Variable, ...] = tuple(c.child for c in self.cpts)
        self._index = {v.name: i for i, v in enumerate(self.variables)}
        if len(self._index) != len(self.variables):
            raise ValueError("duplicate variable names")
        parents = []
        for cpt in self.cpts:
            idx = []
            for p in cpt.parents:
                if p.name not in self._index:
                    raise ValueError(f"parent {p.name!r} of {cpt.child.name!r} is not in the network")
                if self.variables[self._index[p.name]] != p:
                    raise ValueError(f"parent {p.name!r} disagrees with its own definition")
                idx.append(self._index[p.name])
            if len(set(idx)) != len(idx):
                raise ValueError(f"repeated parent for {cpt.child.name!r}")
            parents.append(tuple(idx))
        self.parents: Structure = tuple(parents)
        self.order = topological_order(self.parents)

    @classmethod
    def from_structure(
        cls, variables: Sequence[Variable], parents: Structure, tables: Sequence[np.ndarray]
    ) -> "BayesianNetwork":
        cpts = [
            Cpt(v, tuple(variables[p] for p in ps), t)
            for v, ps, t in zip(variables, parents, tables, strict=True)
        ]
        return cls(cpts)

    def __repr__(self):
        edges = sum(len(p) for p in self.parents)
        return f"BayesianNetwork({len(self.variables)} nodes, {edges} edges)"

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise InvalidQueryError(f"unknown variable {name!r}") from None

    def variable(self, name: str) -> Variable:
        return self.variables[self.index(name)]

    def cpt(self, name: str) -> Cpt:
        return self.cpts[self.index(name)]

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        out = [[] for _ in self.variables]
        for i, ps in enumerate(self.parents):
            for p in ps:
                out[p].append(i)
        return tuple(tuple(c) for c in out)

    def encode(self, assignment: Mapping[str, str]) -> dict[int, int]:
        """Map ``{name: state}`` to ``{variable index: state index}``."""
        out = {}
        for name, state in assignment.items():
            i = self.index(name)
            try:
                out[i] = self.variables[i].index(state)
            except KeyError as e:
                raise InvalidQueryError(str(e)) from None
        return out

    def same_structure(self, other: "BayesianNetwork") -> bool:
        return self.variables == other.variables and self.parents == other.parents

    @cached_property
    def _inference(self):
        from .inference import JunctionTree

        return JunctionTree(self)

    @property
    def junction_tree(self):
        return self._inference


def joint_probability(net: BayesianNetwork, assignment: Mapping[str, str]) -> float:
    """Chain-rule product of CPT entries for a full assignment."""
    codes = net.encode(assignment)
    if len(codes) != len(net.variables):
        missing = [v.name for i, v in enumerate(net.variables) if i not in codes]
        raise InvalidQueryError(f"assignment does not cover {missing}")
    p = 1.0
    for i, cpt in enumerate(net.cpts):
        idx = tuple(codes[j] for j in net.parents[i]) + (codes[i],)
        p *= float(cpt.table[idx])
    return p


def forward_sample(net: BayesianNetwork, n: int, seed: int | np.random.Generator | None = None) -> DataTable:
    """Ancestral sampling of ``n`` complete records."""
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.default_rng(seed)
    codes = np.zeros((n, len(net.variables)), dtype=np.int64)
    for i in net.order:
        cpt = net.cpts[i]
        ps = net.parents[i]
        if ps:
            probs = cpt.table[tuple(codes[:, p] for p in ps)]
        else:
            probs = np.broadcast_to(cpt.table, (n, cpt.child.cardinality))
        cdf = np.cumsum(probs, axis=1)
        u = rng.random(n)[:, None]
        # u < cdf[-1] always holds unless rounding leaves cdf[-1] below 1.
        codes[:, i] = np.minimum((u >= cdf).sum(axis=1), cpt.child.cardinality - 1)
    return DataTable.from_codes(net.variables, codes)
