"""Parameter and structure learning for discrete Bayesian networks.

Every parameter estimate uses add-one smoothing,
``(N_ijk + 1) / (N_ij + r_i)``, so no learned probability is ever zero.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .bn import BayesianNetwork, Structure, topological_order
from .table import MISSING, DataTable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class K2Config:
    ordering: tuple[int, ...] | None = None  # None: column order
    max_parents: int = 3
    score_cache_enabled: bool = True

    def __post_init__(self):
        if self.max_parents < 0:
            raise ValueError("max_parents must be >= 0")


@dataclass(frozen=True)
class EmConfig:
    max_iterations: int = 100
    log_likelihood_tolerance: float = 1e-4
    seed: int | None = None  # None: deterministic available-case start
    restarts: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.log_likelihood_tolerance > 0:
            raise ValueError("log_likelihood_tolerance must be positive")


def _flat_index(columns: Sequence[np.ndarray], cards: Sequence[int]) -> np.ndarray:
    idx = np.zeros(len(columns[0]), dtype=np.int64)
    for col, r in zip(columns, cards):
        idx *= r
        idx += col
    return idx


def family_counts(codes: np.ndarray, child: int, parents: Sequence[int], cards: Sequence[int],
                  weights: np.ndarray | None = None) -> np.ndarray:
    """Counts shaped ``(*parent_cards, child_card)`` over rows observing the whole family."""
    fam = list(parents) + [child]
    shape = tuple(cards[v] for v in fam)
    cols = [codes[:, v] for v in fam]
    keep = np.ones(codes.shape[0], dtype=bool)
    for col in cols:
        keep &= col != MISSING
    if not keep.all():
        cols = [c[keep] for c in cols]
        weights = None if weights is None else weights[keep]
    flat = _flat_index(cols, shape) if len(cols[0]) else np.zeros(0, dtype=np.int64)
    return np.bincount(flat, weights=weights, minlength=int(np.prod(shape))).reshape(shape).astype(float)


def smooth(counts: np.ndarray) -> np.ndarray:
    r = counts.shape[-1]
    return (counts + 1.0) / (counts.sum(axis=-1, keepdims=True) + r)


def _cards(table: DataTable) -> list[int]:
    return [c.cardinality for c in table.columns]


def _check_structure(structure: Structure, n: int) -> Structure:
    structure = tuple(tuple(p) for p in structure)
    if len(structure) != n:
        raise ValueError(f"structure covers {len(structure)} variables, table has {n}")
    topological_order(structure)
    return structure


def fit_parameters_mle(structure: Structure, table: DataTable) -> BayesianNetwork:
    codes = table.codes
    if np.any(codes == MISSING):
        raise ValueError("fit_parameters_mle needs a complete table; use fit_parameters_em")
    structure = _check_structure(structure, len(table.columns))
    cards = _cards(table)
    tables = [smooth(family_counts(codes, i, ps, cards)) for i, ps in enumerate(structure)]
    return BayesianNetwork.from_structure(table.columns, structure, tables)


@dataclass
class EmResult:
    network: BayesianNetwork
    log_likelihoods: list[float] = field(default_factory=list)
    # Observed-data log-likelihood plus the log of the add-one smoothing prior;
    # this is the quantity EM with smoothing provably never decreases.
    objectives: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _complete_loglik(counts: list[np.ndarray], tables: list[np.ndarray]) -> float:
    return float(sum((c * np.log(t)).sum() for c, t in zip(counts, tables)))


def _run_em(structure, table, cfg, tables) -> EmResult:
    codes = table.codes
    cards = _cards(table)
    complete = np.all(codes != MISSING, axis=1)
    base = [family_counts(codes[complete], i, ps, cards) for i, ps in enumerate(structure)]
    partial = codes[~complete]
    if len(partial):
        partial, weights = np.unique(partial, axis=0, return_counts=True)
        weights = weights.astype(float)
    result = EmResult(network=None)
    for it in range(1, cfg.max_iterations + 1):
        net = BayesianNetwork.from_structure(table.columns, structure, tables)
        ll = _complete_loglik(base, tables)
        expected = base
        if len(partial):
            extra, ll_partial = net.junction_tree.family_counts(partial, weights)
            expected = [b + e for b, e in zip(base, extra)]
            ll += ll_partial
        objective = ll + float(sum(np.log(t).sum() for t in tables))
        result.network = net
        result.iterations = it
        if result.log_likelihoods and ll - result.log_likelihoods[-1] < cfg.log_likelihood_tolerance:
            result.log_likelihoods.append(ll)
            result.objectives.append(objective)
            result.converged = True
            return result
        result.log_likelihoods.append(ll)
        result.objectives.append(objective)
        tables = [smooth(e) for e in expected]
        if not len(partial):
            result.network = BayesianNetwork.from_structure(table.columns, structure, tables)
            result.converged = True
            return result
    result.network = BayesianNetwork.from_structure(table.columns, structure, tables)
    return result


def em(structure: Structure, table: DataTable, cfg: EmConfig = EmConfig()) -> EmResult:
    """Expectation maximisation for CPTs under missing-at-random cells.

    The E-step conditions each incomplete row on all of its observed cells
    (rows with identical patterns are pooled); the M-step applies the
    smoothed estimator to the expected counts.
    """
    structure = _check_structure(structure, len(table.columns))
    codes = table.codes
    cards = _cards(table)
    for j, col in enumerate(table.columns):
        if np.all(codes[:, j] == MISSING):
            raise ValueError(f"column {col.name!r} has no observed cells")
    start = [smooth(family_counts(codes, i, ps, cards)) for i, ps in enumerate(structure)]
    best = _run_em(structure, table, cfg, start)
    if cfg.restarts:
        rng = np.random.default_rng(cfg.seed)
        for _ in range(cfg.restarts):
            init = [rng.dirichlet(np.ones(t.shape[-1]), size=t.shape[:-1]).reshape(t.shape)
                    for t in start]
            cand = _run_em(structure, table, cfg, init)
            if cand.objectives[-1] > best.objectives[-1]:
                best = cand
    return best


def fit_parameters_em(structure: Structure, table: DataTable, cfg: EmConfig = EmConfig()) -> BayesianNetwork:
    return em(structure, table, cfg).network


def fit_parameters(structure: Structure, table: DataTable, cfg: EmConfig = EmConfig()) -> BayesianNetwork:
    """MLE on complete tables, EM otherwise."""
    if np.any(table.missing):
        return fit_parameters_em(structure, table, cfg)
    return fit_parameters_mle(structure, table)


def _score_from_counts(counts: np.ndarray) -> float:
    r = counts.shape[-1]
    rows = counts.reshape(-1, r)
    n_j = rows.sum(axis=1)
    seen = n_j > 0  # unobserved parent configurations contribute exactly zero
    return float(np.sum(gammaln(r) - gammaln(n_j[seen] + r)) + np.sum(gammaln(rows[seen] + 1)))


def k2_score(child: int, parents: Sequence[int], table: DataTable, rows: np.ndarray | None = None) -> float:
    """Cooper-Herskovits log score of one family.

    ``sum_j [log (r-1)! - log (N_j + r - 1)! + sum_k log N_jk!]``; rows with a
    missing cell in the family are left out.
    """
    codes = table.codes if rows is None else table.codes[rows]
    return _score_from_counts(family_counts(codes, child, parents, _cards(table)))


def structure_score(structure: Structure, table: DataTable) -> float:
    return sum(k2_score(i, ps, table) for i, ps in enumerate(structure))


class _Scorer:
    def __init__(self, table: DataTable, cache: bool):
        codes = table.codes
        self.cols = [np.ascontiguousarray(codes[:, j]) for j in range(codes.shape[1])]
        self.cards = _cards(table)
        self.missing_cols = {j for j, c in enumerate(self.cols) if np.any(c == MISSING)}
        self.cache = {} if cache else None

    def __call__(self, child, parents, observed):
        mask_vars = frozenset(v for v in observed if v in self.missing_cols)
        key = (child, parents, mask_vars)
        if self.cache is not None and key in self.cache:
            return self.cache[key]
        fam = list(parents) + [child]
        cols = [self.cols[v] for v in fam]
        if mask_vars:
            keep = np.ones(len(cols[0]), dtype=bool)
            for v in mask_vars:
                keep &= self.cols[v] != MISSING
            cols = [c[keep] for c in cols]
        shape = tuple(self.cards[v] for v in fam)
        counts = np.bincount(_flat_index(cols, shape), minlength=int(np.prod(shape)))
        s = _score_from_counts(counts.reshape(-1, shape[-1]))
        if self.cache is not None:
            self.cache[key] = s
        return s


def k2_search(table: DataTable, cfg: K2Config = K2Config()) -> Structure:
    """Greedy K2: each node takes the best-scoring predecessor parents in turn.

    A candidate is compared against the current parent set on the same rows
    (those observing the child, the current parents and the candidate), so a
    column's missing cells cannot make it look attractive. Ties go to the
    lowest column index.
    """
    n = len(table.columns)
    ordering = tuple(range(n)) if cfg.ordering is None else tuple(cfg.ordering)
    if sorted(ordering) != list(range(n)):
        raise ValueError("ordering must be a permutation of the column indices")
    score = _Scorer(table, cfg.score_cache_enabled)
    structure: list[tuple[int, ...]] = [()] * n
    for pos, child in enumerate(ordering):
        preds = sorted(ordering[:pos])
        parents: tuple[int, ...] = ()
        while len(parents) < cfg.max_parents:
            best, best_gain = None, 0.0
            for z in preds:
                if z in parents:
                    continue
                cand = tuple(sorted(parents + (z,)))
                observed = (child, *cand)
                gain = score(child, cand, observed) - score(child, parents, observed)
                if gain > best_gain:
                    best, best_gain = cand, gain
            if best is None:
                break
            parents = best
        structure[child] = parents
    return tuple(structure)


def default_ordering(names: Sequence[str], class_name: str) -> tuple[int, ...]:
    """Column order with the class variable moved to the end."""
    idx = list(range(len(names)))
    c = list(names).index(class_name)
    idx.remove(c)
    return tuple(idx + [c])
