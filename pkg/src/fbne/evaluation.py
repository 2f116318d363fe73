"""AUC scoring and stratified cross-validation of the ensemble and its baselines."""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .ensemble import (
    EnsembleModel,
    LearningConfig,
    aggregate,
    train_central,
    train_fbne,
    vertibayes_like,
)
from .federation import SplitPlan, make_parties
from .table import DataTable, Variable

logger = logging.getLogger(__name__)

FBNE = "FBNE"
CENTRAL = "central"
VERTIBAYES = "vertibayes-equivalent"


class UndefinedAUCWarning(UserWarning):
    pass


def binary_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    """Mann-Whitney AUC with average ranks for ties; NaN without both classes."""
    scores = np.asarray(scores, dtype=float)
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(scores)
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """AUC of class-probability rows against integer labels.

    Binary problems score the probability of label 1 (1-D scores are taken
    as that probability directly). More classes give the unweighted mean of
    the one-vs-rest AUCs over classes that have both positives and
    negatives. Undefined cases return NaN with an ``UndefinedAUCWarning``.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(int)
    if scores.ndim == 1:
        value = binary_auc(scores, labels == 1)
    elif scores.shape[1] == 2:
        value = binary_auc(scores[:, 1], labels == 1)
    else:
        per_class = [binary_auc(scores[:, k], labels == k) for k in range(scores.shape[1])]
        per_class = [a for a in per_class if not np.isnan(a)]
        value = float(np.mean(per_class)) if per_class else float("nan")
    if np.isnan(value):
        warnings.warn("AUC undefined: only one class present", UndefinedAUCWarning, stacklevel=2)
    return value


@dataclass(frozen=True, eq=False)
class FoldPlan:
    n_folds: int
    assignments: np.ndarray
    seed: int | None = None

    def test_rows(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == k)

    def train_rows(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != k)


def stratified_folds(labels: np.ndarray, n_folds: int = 10, seed=None) -> FoldPlan:
    """Deal shuffled rows, grouped by class, round-robin into folds."""
    labels = np.asarray(labels)
    if not 1 < n_folds <= len(labels):
        raise ValueError("need 2 <= n_folds <= number of rows")
    rng = np.random.default_rng(seed)
    dealt = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)])
    assign = np.empty(len(labels), dtype=int)
    assign[dealt] = np.arange(len(labels)) % n_folds
    return FoldPlan(n_folds, assign, seed)


@dataclass
class ResultRecord:
    scenario: str
    model: str
    fold_aucs: list[float]
    wall_time: dict[str, float] = field(default_factory=dict)
    predictions: np.ndarray | None = field(default=None, repr=False)
    skipped: str | None = None

    @property
    def auc(self) -> float:
        vals = [a for a in self.fold_aucs if not np.isnan(a)]
        return float(np.mean(vals)) if vals else float("nan")


def _label_codes(table: DataTable, class_column: str) -> np.ndarray:
    col = table.column(class_column)
    if not isinstance(col, Variable):
        raise TypeError(f"class column {class_column!r} must be categorical")
    y = table.data[:, table.column_index(class_column)]
    if np.isnan(y).any():
        raise ValueError("class labels may not be missing")
    return y.astype(int)


def party_name(party_id) -> str:
    return f"party-{party_id}"


def cross_validate(
    table: DataTable,
    class_column: str,
    plan: SplitPlan,
    cfg: LearningConfig = LearningConfig(),
    folds: FoldPlan | None = None,
    scenario: str = "",
    seed=None,
) -> list[ResultRecord]:
    """Score FBNE, every local model, the central model and the VertiBayes stand-in.

    The split is drawn once over all rows; each fold then trains every model
    (discretization included) on its training rows only. Every record keeps
    the pooled out-of-fold class probabilities in ``predictions``.
    """
    labels = _label_codes(table, class_column)
    folds = folds or stratified_folds(labels, 10, seed)
    parties = make_parties(table, plan, class_column)
    r = table.column(class_column).cardinality
    names = [FBNE] + [party_name(p.party_id) for p in parties] + [CENTRAL, VERTIBAYES]
    records = {n: ResultRecord(scenario, n, [], {"structure": 0.0, "parameters": 0.0, "prediction": 0.0},
                               np.full((table.n_rows, r), np.nan)) for n in names}
    rng = np.random.default_rng(seed)
    for k in range(folds.n_folds):
        train, test = folds.train_rows(k), folds.test_rows(k)
        test_table = table.select(rows=test)
        y = labels[test]
        ensemble: EnsembleModel = train_fbne(table, parties, cfg, train)
        central = train_central(table, class_column, cfg, train)
        vb = vertibayes_like(central, table.select(rows=train), cfg, rng.integers(2**32))
        member_probs = []
        member_time = 0.0
        for party, member in zip(parties, ensemble.members):
            t0 = time.perf_counter()
            p = member.model.predict_proba(test_table)
            dt = time.perf_counter() - t0
            member_time += dt
            rec = records[party_name(party.party_id)]
            rec.wall_time["prediction"] += dt
            for phase in ("structure", "parameters"):
                rec.wall_time[phase] += member.model.timings[phase]
                records[FBNE].wall_time[phase] += member.model.timings[phase]
            member_probs.append(p)
        t0 = time.perf_counter()
        fbne_p = aggregate(ensemble, member_probs, seed=rng.integers(2**32))
        records[FBNE].wall_time["prediction"] += time.perf_counter() - t0 + member_time
        preds = {FBNE: fbne_p}
        preds.update({party_name(p.party_id): mp for p, mp in zip(parties, member_probs)})
        for name, model in ((CENTRAL, central), (VERTIBAYES, vb)):
            t0 = time.perf_counter()
            preds[name] = model.predict_proba(test_table)
            rec = records[name]
            rec.wall_time["prediction"] += time.perf_counter() - t0
            for phase in ("structure", "parameters"):
                rec.wall_time[phase] += model.timings[phase]
        for name, p in preds.items():
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", UndefinedAUCWarning)
                a = auc(p, y)
            if caught:
                logger.warning("fold %d: AUC undefined for %s, fold excluded", k, name)
            records[name].fold_aucs.append(a)
            records[name].predictions[test] = p
    return [records[n] for n in names]
