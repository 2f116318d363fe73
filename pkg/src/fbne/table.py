"""Rectangular datasets with discrete and continuous columns.

Cells are stored in a float array. Discrete cells hold the integer index of
their state, continuous cells hold the raw value, and ``NaN`` marks a missing
cell in either kind of column. ``DataTable.codes`` exposes the discrete view
as an ``int64`` array in which missing cells are ``MISSING`` (-1), which is
never a valid state index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MISSING = -1


@dataclass(frozen=True)
class Variable:
    """A discrete variable with an ordered tuple of state labels."""

    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        if len(self.states) < 2:
            raise ValueError(f"variable {self.name!r} needs at least 2 states")
        if len(set(self.states)) != len(self.states):
            raise ValueError(f"variable {self.name!r} has duplicate state labels")

    @property
    def cardinality(self) -> int:
        return len(self.states)

    def index(self, state: str) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise KeyError(f"{state!r} is not a state of {self.name!r}") from None


@dataclass(frozen=True)
class Continuous:
    """A numeric column awaiting discretization."""

    name: str


Column = Variable | Continuous


@dataclass(frozen=True, eq=False)
class DataTable:
    columns: tuple[Column, ...]
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            data = data.reshape(-1, len(self.columns))
        if data.shape[1] != len(self.columns):
            raise ValueError(
                f"table has {len(self.columns)} columns but data has {data.shape[1]}"
            )
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names")
        for j, col in enumerate(self.columns):
            if isinstance(col, Variable):
                vals = data[:, j]
                obs = vals[~np.isnan(vals)]
                if obs.size and (
                    np.any(obs != np.floor(obs)) or obs.min() < 0 or obs.max() >= col.cardinality
                ):
                    raise ValueError(f"column {col.name!r} holds an invalid state index")
        data.setflags(write=False)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "data", data)

    @classmethod
    def from_codes(cls, columns: Sequence[Variable], codes: np.ndarray) -> "DataTable":
        codes = np.asarray(codes)
        data = codes.astype(float).reshape(-1, len(columns))
        data[data < 0] = np.nan
        return cls(tuple(columns), data)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    def __len__(self):
        return self.n_rows

    @property
    def is_discrete(self) -> bool:
        return all(isinstance(c, Variable) for c in self.columns)

    @property
    def codes(self) -> np.ndarray:
        if not self.is_discrete:
            raise TypeError("table has continuous columns; discretize it first")
        out = np.where(np.isnan(self.data), MISSING, self.data).astype(np.int64)
        return out

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.data)

    def column_index(self, name: str) -> int:
        for j, c in enumerate(self.columns):
            if c.name == name:
                return j
        raise KeyError(f"no column named {name!r}")

    def column(self, name: str) -> Column:
        return self.columns[self.column_index(name)]

    def select(self, names: Sequence[str] | None = None, rows=None) -> "DataTable":
        """Sub-table by column names (in the given order) and/or row indices."""
        data = self.data
        cols = self.columns
        if rows is not None:
            data = data[np.asarray(rows)]
        if names is not None:
            idx = [self.column_index(n) for n in names]
            data = data[:, idx]
            cols = tuple(self.columns[i] for i in idx)
        return DataTable(cols, data)

    def with_data(self, data: np.ndarray) -> "DataTable":
        return DataTable(self.columns, data)

    def labels(self, j: int) -> list[str | float | None]:
        """Column ``j`` rendered as state labels (``None`` for missing)."""
        col = self.columns[j]
        out = []
        for v in self.data[:, j]:
            if np.isnan(v):
                out.append(None)
            elif isinstance(col, Variable):
                out.append(col.states[int(v)])
            else:
                out.append(float(v))
        return out
