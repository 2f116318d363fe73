"""CSV ingestion, equal-frequency discretization and missing-value injection."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .table import Continuous, DataTable, Variable

logger = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "?"})


class DataFormatError(ValueError):
    pass


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_csv(
    path,
    categorical: Iterable[str] = (),
    continuous: Iterable[str] = (),
) -> DataTable:
    """Read a headed CSV file into a ``DataTable``.

    Columns whose observed values all parse as numbers are continuous unless
    named in ``categorical``. Categorical states are sorted lexically. ``?`` and
    empty cells are missing.
    """
    categorical = set(categorical)
    continuous = set(continuous)
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DataFormatError(f"{path}: no data rows")
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataFormatError(
                f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}"
            )
    unknown = (categorical | continuous) - set(header)
    if unknown:
        raise DataFormatError(f"{path}: schema hints name unknown columns {sorted(unknown)}")

    columns = []
    data = np.full((len(body), len(header)), np.nan)
    for j, name in enumerate(header):
        cells = [row[j].strip() for row in body]
        observed = [c for c in cells if c not in MISSING_TOKENS]
        if not observed:
            raise DataFormatError(f"{path}: column {name!r} has no observed values")
        numeric = name not in categorical and (
            name in continuous or all(_is_number(c) for c in observed)
        )
        if numeric:
            columns.append(Continuous(name))
            for i, c in enumerate(cells):
                if c not in MISSING_TOKENS:
                    try:
                        data[i, j] = float(c)
                    except ValueError:
                        raise DataFormatError(
                            f"{path}: row {i + 2}, column {name!r}: {c!r} is not numeric"
                        ) from None
        else:
            states = sorted(set(observed))
            if len(states) == 1:
                states.append(f"not_{states[0]}")
            lookup = {s: k for k, s in enumerate(states)}
            columns.append(Variable(name, tuple(states)))
            for i, c in enumerate(cells):
                if c not in MISSING_TOKENS:
                    data[i, j] = lookup[c]
    return DataTable(tuple(columns), data)


def write_csv(table: DataTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(table.names)
        cols = [table.labels(j) for j in range(len(table.columns))]
        for row in zip(*cols):
            w.writerow(["?" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])


@dataclass(frozen=True)
class DiscretizationSpec:
    """Cut points per continuous column; bin k is ``[cuts[k-1], cuts[k])``."""

    cuts: dict[str, np.ndarray] = field(default_factory=dict)

    def variable(self, name: str) -> Variable:
        cuts = self.cuts[name]
        if len(cuts) == 0:
            # Degenerate single-bin column; a second, empty state keeps it a valid variable.
            return Variable(name, ("all", "none"))
        edges = ["-inf", *(f"{c:.6g}" for c in cuts), "inf"]
        return Variable(name, tuple(f"[{a},{b})" for a, b in zip(edges[:-1], edges[1:])))

    def apply(self, table: DataTable) -> DataTable:
        columns = list(table.columns)
        data = table.data.copy()
        for j, col in enumerate(table.columns):
            if isinstance(col, Continuous):
                if col.name not in self.cuts:
                    raise KeyError(f"no discretization fitted for {col.name!r}")
                vals = data[:, j]
                obs = ~np.isnan(vals)
                vals[obs] = np.searchsorted(self.cuts[col.name], vals[obs], side="right")
                columns[j] = self.variable(col.name)
        return DataTable(tuple(columns), data)


def min_bin_count(n: int, min_fraction: float) -> int:
    return max(1, math.ceil(round(min_fraction * n, 9)))


def fit_cuts(values: np.ndarray, min_fraction: float = 0.10) -> np.ndarray:
    """Equal-frequency cut points with every bin holding ``>= min_fraction`` of the values.

    Ties are never split across bins, so a heavily repeated value enlarges its
    bin rather than violating the bound.
    """
    values = np.asarray(values, dtype=float)
    values = values[~np.isnan(values)]
    uniq, counts = np.unique(values, return_counts=True)
    n = counts.sum()
    if len(uniq) < 2:
        return np.array([])
    need = min_bin_count(n, min_fraction)
    target = n / math.floor(1 / min_fraction + 1e-9)
    boundaries = []  # index into uniq where a new bin starts
    in_bin = 0
    cum = 0
    for k, c in enumerate(counts):
        in_bin += c
        cum += c
        if in_bin >= need and cum >= (len(boundaries) + 1) * target - 1e-9 and k + 1 < len(uniq):
            boundaries.append(k + 1)
            in_bin = 0
    if boundaries and in_bin < need:
        boundaries.pop()
    return np.array([(uniq[b - 1] + uniq[b]) / 2 for b in boundaries])


def fit_discretizer(table: DataTable, min_fraction: float = 0.10) -> DiscretizationSpec:
    if table.n_rows == 0:
        raise ValueError("cannot fit a discretizer on an empty table")
    if not 0 < min_fraction <= 0.5:
        raise ValueError("min_fraction must be in (0, 0.5]")
    cuts = {}
    for j, col in enumerate(table.columns):
        if isinstance(col, Continuous):
            c = fit_cuts(table.data[:, j], min_fraction)
            if len(c) == 0:
                logger.warning("column %r has fewer than 2 distinct values; using one bin", col.name)
            cuts[col.name] = c
    return DiscretizationSpec(cuts)


def discretize(table: DataTable, spec: DiscretizationSpec) -> DataTable:
    return spec.apply(table)


def inject_missing(
    table: DataTable,
    level: float,
    seed=None,
    exempt: Sequence[str] = (),
) -> DataTable:
    """Blank each non-exempt cell independently with probability ``level``."""
    if not 0 <= level < 1:
        raise ValueError("missing level must be in [0, 1)")
    rng = np.random.default_rng(seed)
    mask = rng.random(table.data.shape) < level
    for name in exempt:
        mask[:, table.column_index(name)] = False
    data = table.data.copy()
    data[mask] = np.nan
    return table.with_data(data)
