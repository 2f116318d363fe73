"""Simulated federations: party views over a shared table and secure aggregation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .table import DataTable

MIN_PARTY_COLUMNS = 2
MIN_PARTY_ROWS = 50
BIAS_LEVELS = (0.5, 0.75, 0.85, 0.95)
NO_BIAS = 0.5


class InfeasibleSplitError(ValueError):
    pass


class SessionConfigurationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PartyView:
    """One party's columns and rows of a shared table.

    ``parameter_rows`` is set for hybrid parties trained in shared-overlap
    mode: CPTs are then fit on those rows while structure is learnt on
    ``rows`` only.
    """

    party_id: int
    columns: tuple[str, ...]
    rows: np.ndarray
    class_column: str
    parameter_rows: np.ndarray | None = None

    def __post_init__(self):
        if self.class_column not in self.columns:
            raise ValueError("a party view must include the class column")

    @property
    def attributes(self) -> tuple[str, ...]:
        return tuple(c for c in self.columns if c != self.class_column)

    def local(self, table: DataTable, rows: np.ndarray | None = None) -> DataTable:
        """The party's slice, optionally restricted to ``rows`` (e.g. a training fold)."""
        mine = self.rows if rows is None else np.intersect1d(self.rows, rows)
        return table.select(self.columns, mine)

    def parameter_slice(self, table: DataTable, rows: np.ndarray | None = None) -> DataTable:
        if self.parameter_rows is None:
            return self.local(table, rows)
        mine = self.parameter_rows if rows is None else np.intersect1d(self.parameter_rows, rows)
        return table.select(self.columns, mine)


@dataclass(frozen=True)
class SplitPlan:
    kind: str  # vertical | horizontal | hybrid | manual
    n_parties: int = 2
    bias: float = NO_BIAS
    hybrid_mode: str = "local-only"  # or shared-overlap
    seed: int = 0
    assignment: Mapping[int, Sequence[str]] | None = None

    def __post_init__(self):
        if self.kind not in ("vertical", "horizontal", "hybrid", "manual"):
            raise ValueError(f"unknown split kind {self.kind!r}")
        if self.hybrid_mode not in ("local-only", "shared-overlap"):
            raise ValueError(f"unknown hybrid mode {self.hybrid_mode!r}")
        if not 0 <= self.bias <= 1:
            raise ValueError("bias must be a probability")
        if self.kind == "hybrid" and self.n_parties != 3:
            raise ValueError("hybrid splits always have 3 parties")
        if self.kind == "manual" and not self.assignment:
            raise ValueError("manual splits need a column assignment")


def _attributes(table: DataTable, class_column: str) -> list[str]:
    table.column_index(class_column)
    return [n for n in table.names if n != class_column]


def _partition_columns(attrs, n_parties, rng) -> list[list[str]]:
    """Random partition with at least two attributes per party."""
    n = len(attrs)
    if n < MIN_PARTY_COLUMNS * n_parties:
        raise InfeasibleSplitError(
            f"{n} attributes cannot give {n_parties} parties {MIN_PARTY_COLUMNS} each"
        )
    perm = [attrs[i] for i in rng.permutation(n)]
    # Guaranteed minimum, then the remainder assigned uniformly at random.
    sizes = np.full(n_parties, MIN_PARTY_COLUMNS)
    extra = rng.integers(0, n_parties, size=n - sizes.sum())
    sizes += np.bincount(extra, minlength=n_parties)
    out, start = [], 0
    for s in sizes:
        out.append(perm[start:start + s])
        start += s
    order = {name: k for k, name in enumerate(attrs)}
    return [sorted(g, key=order.__getitem__) for g in out]


def _with_class(attrs, class_column, all_names):
    keep = set(attrs) | {class_column}
    return tuple(n for n in all_names if n in keep)


def split_vertical(table: DataTable, n_parties: int, seed=None, class_column: str | None = None) -> list[PartyView]:
    class_column = class_column or table.names[-1]
    rng = np.random.default_rng(seed)
    groups = _partition_columns(_attributes(table, class_column), n_parties, rng)
    rows = np.arange(table.n_rows)
    return [
        PartyView(k + 1, _with_class(g, class_column, table.names), rows, class_column)
        for k, g in enumerate(groups)
    ]


def split_manual(table: DataTable, assignment: Mapping[int, Sequence[str]], class_column: str) -> list[PartyView]:
    """Vertical split from an explicit ``party id -> column names`` mapping."""
    attrs = set(_attributes(table, class_column))
    seen: set[str] = set()
    views = []
    for pid in sorted(assignment, key=int):
        cols = [c for c in assignment[pid] if c != class_column]
        unknown = set(cols) - attrs
        if unknown:
            raise InfeasibleSplitError(f"party {pid} names unknown columns {sorted(unknown)}")
        if seen & set(cols):
            raise InfeasibleSplitError(f"party {pid} repeats columns {sorted(seen & set(cols))}")
        if len(cols) < MIN_PARTY_COLUMNS:
            raise InfeasibleSplitError(f"party {pid} has fewer than {MIN_PARTY_COLUMNS} attributes")
        seen |= set(cols)
        views.append(PartyView(int(pid), _with_class(cols, class_column, table.names),
                               np.arange(table.n_rows), class_column))
    return views


def _rebalance(assign: np.ndarray, n_parties: int, rng) -> np.ndarray:
    assign = assign.copy()
    while True:
        sizes = np.bincount(assign, minlength=n_parties)
        small = int(np.argmin(sizes))
        if sizes[small] >= MIN_PARTY_ROWS:
            return assign
        big = int(np.argmax(sizes))
        donors = np.flatnonzero(assign == big)
        move = rng.choice(donors, size=min(MIN_PARTY_ROWS - sizes[small], sizes[big] - MIN_PARTY_ROWS),
                          replace=False)
        assign[move] = small


def route_rows(labels: np.ndarray, n_parties: int, bias: float, rng, first_label: int = 0) -> np.ndarray:
    """Party index (0-based) per row.

    Rows carrying ``first_label`` go to party 0 with probability ``bias``,
    all other rows with probability ``(1 - bias) / (n_parties - 1)``; rows not
    sent to party 0 are spread uniformly over the rest. ``NO_BIAS`` means a
    uniform assignment for any party count.
    """
    n = len(labels)
    if n_parties == 1:
        return np.zeros(n, dtype=int)
    if bias == NO_BIAS:
        return rng.integers(0, n_parties, size=n)
    p_first = np.where(labels == first_label, bias, (1 - bias) / (n_parties - 1))
    to_first = rng.random(n) < p_first
    others = rng.integers(1, n_parties, size=n)
    return np.where(to_first, 0, others)


def split_horizontal(table: DataTable, n_parties: int, bias: float = NO_BIAS, seed=None,
                     class_column: str | None = None) -> list[PartyView]:
    class_column = class_column or table.names[-1]
    if table.n_rows < MIN_PARTY_ROWS * n_parties:
        raise InfeasibleSplitError(
            f"{table.n_rows} rows cannot give {n_parties} parties {MIN_PARTY_ROWS} each"
        )
    rng = np.random.default_rng(seed)
    labels = table.data[:, table.column_index(class_column)]
    assign = _rebalance(route_rows(labels, n_parties, bias, rng), n_parties, rng)
    return [
        PartyView(k + 1, tuple(table.names), np.flatnonzero(assign == k), class_column)
        for k in range(n_parties)
    ]


def split_hybrid(table: DataTable, seed=None, class_column: str | None = None,
                 mode: str = "local-only") -> list[PartyView]:
    """Party 1 holds one attribute half for every row; parties 2 and 3 split
    the other half's rows between them."""
    class_column = class_column or table.names[-1]
    rng = np.random.default_rng(seed)
    if table.n_rows < 2 * MIN_PARTY_ROWS:
        raise InfeasibleSplitError(f"{table.n_rows} rows cannot give two parties {MIN_PARTY_ROWS} each")
    half_a, half_b = _partition_columns(_attributes(table, class_column), 2, rng)
    perm = rng.permutation(table.n_rows)
    mid = table.n_rows // 2
    rows2, rows3 = np.sort(perm[:mid]), np.sort(perm[mid:])
    all_rows = np.arange(table.n_rows)
    cols_b = _with_class(half_b, class_column, table.names)
    shared = all_rows if mode == "shared-overlap" else None
    return [
        PartyView(1, _with_class(half_a, class_column, table.names), all_rows, class_column),
        PartyView(2, cols_b, rows2, class_column, parameter_rows=shared),
        PartyView(3, cols_b, rows3, class_column, parameter_rows=shared),
    ]


def make_parties(table: DataTable, plan: SplitPlan, class_column: str) -> list[PartyView]:
    if plan.kind == "vertical":
        return split_vertical(table, plan.n_parties, plan.seed, class_column)
    if plan.kind == "horizontal":
        return split_horizontal(table, plan.n_parties, plan.bias, plan.seed, class_column)
    if plan.kind == "hybrid":
        return split_hybrid(table, plan.seed, class_column, plan.hybrid_mode)
    return split_manual(table, plan.assignment, class_column)


# Mersenne prime 2**61 - 1: sums of two residues still fit in int64.
DEFAULT_MODULUS = (1 << 61) - 1


@dataclass
class SecureSumSession:
    """One aggregation round of zero-sum additive masking over Z_modulus.

    Each party submits ``encode(weight * p) + mask`` where the masks of all
    parties sum to zero modulo ``modulus``. The aggregator only ever sees
    masked shares and their total; ``audit`` records exactly those values.
    """

    n_parties: int
    modulus: int = DEFAULT_MODULUS
    fixed_point_scale: int = 10**9
    max_weight: float = 1e6
    seed: int | None = None
    audit: list[tuple[str, np.ndarray]] = field(default_factory=list, repr=False)
    masks: list[np.ndarray] = field(default_factory=list, repr=False)
    _used: bool = field(default=False, repr=False)

    def __post_init__(self):
        if self.n_parties < 1:
            raise SessionConfigurationError("a session needs at least one party")
        if self.fixed_point_scale < 10**6:
            raise SessionConfigurationError("fixed_point_scale must be >= 1e6")
        if self.modulus > DEFAULT_MODULUS:
            raise SessionConfigurationError("modulus must fit the int64 share arithmetic (<= 2**61 - 1)")
        # Inputs are weighted probabilities, so each encoded entry is at most
        # max_weight * scale; the true total must stay below the modulus.
        bound = self.n_parties * self.max_weight * self.fixed_point_scale
        if not self.modulus > bound:
            raise SessionConfigurationError(
                f"modulus {self.modulus} does not exceed the worst-case total {bound:.3g}"
            )

    def encode(self, values: np.ndarray) -> np.ndarray:
        return np.rint(np.asarray(values, dtype=float) * self.fixed_point_scale).astype(np.int64)

    def make_masks(self, shape, rng) -> list[np.ndarray]:
        masks = [rng.integers(0, self.modulus, size=shape, dtype=np.int64) for _ in range(self.n_parties - 1)]
        total = np.zeros(shape, dtype=np.int64)
        for m in masks:
            total = (total + m) % self.modulus
        masks.append((self.modulus - total) % self.modulus)
        return masks


def secure_weighted_sum(
    session: SecureSumSession,
    contributions: Sequence[tuple[np.ndarray, float]],
) -> np.ndarray:
    """Weighted mean of the parties' probability vectors via masked shares.

    ``contributions`` holds one ``(vector, weight)`` pair per party; vectors
    may also be ``(rows, classes)`` arrays to aggregate a batch of queries.
    """
    if session._used:
        raise SessionConfigurationError("a secure-sum session is single use")
    if len(contributions) != session.n_parties:
        raise ValueError(f"expected {session.n_parties} contributions, got {len(contributions)}")
    vectors = [np.asarray(v, dtype=float) for v, _ in contributions]
    weights = [float(w) for _, w in contributions]
    shape = vectors[0].shape
    if any(v.shape != shape for v in vectors):
        raise ValueError("all contributions must have the same shape")
    if any(not w > 0 for w in weights):
        raise ValueError("weights must be positive")
    if any(w > session.max_weight for w in weights):
        raise SessionConfigurationError("a weight exceeds the session's max_weight")
    if any(np.any(v < 0) or np.any(v > 1) for v in vectors):
        raise ValueError("contributions must be probabilities")
    session._used = True
    rng = np.random.default_rng(session.seed)
    masks = session.make_masks(shape, rng)
    session.masks = masks
    m = session.modulus
    total = np.zeros(shape, dtype=np.int64)
    for k, (v, w) in enumerate(zip(vectors, weights)):
        share = (session.encode(w * v) + masks[k]) % m
        session.audit.append((f"share:{k}", share))
        total = (total + share) % m
    session.audit.append(("total", total))
    return total.astype(float) / session.fixed_point_scale / sum(weights)
