"""Federated ensembles of Bayesian network classifiers and their baselines."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bn import BayesianNetwork, forward_sample
from .data import DiscretizationSpec, fit_discretizer
from .federation import PartyView, SecureSumSession, secure_weighted_sum
from .inference import posterior
from .learning import EmConfig, K2Config, default_ordering, fit_parameters, fit_parameters_mle, k2_search
from .table import DataTable, Variable


class DegeneratePartyError(ValueError):
    pass


@dataclass(frozen=True)
class LearningConfig:
    max_parents: int = 3
    em: EmConfig = EmConfig()
    min_fraction: float = 0.10
    ordering: tuple[str, ...] | None = None  # column names; default: table order, class last
    bootstrap_size: int | None = None  # None: training-table size
    voting: str = "soft"  # or "hard"

    def __post_init__(self):
        if self.voting not in ("soft", "hard"):
            raise ValueError(f"unknown voting scheme {self.voting!r}")


@dataclass(frozen=True, eq=False)
class LocalModel:
    """A network plus the discretization needed to read raw records."""

    network: BayesianNetwork
    discretizer: DiscretizationSpec
    class_column: str
    timings: dict = field(default_factory=dict, compare=False)

    @property
    def columns(self) -> list[str]:
        return self.network.names

    def prior(self) -> np.ndarray:
        return posterior(self.network, self.class_column)

    def predict_proba(self, records: DataTable) -> np.ndarray:
        local = self.discretizer.apply(records.select(self.columns))
        if tuple(local.columns) != self.network.variables:
            raise ValueError("records do not match the model's variables")
        target = self.network.index(self.class_column)
        post, log_p = self.network.junction_tree.query(local.codes, target)
        bad = ~np.isfinite(log_p)
        if bad.any():
            post[bad] = self.prior()
        return post


def _ordering(names: Sequence[str], class_column: str, cfg: LearningConfig) -> tuple[int, ...]:
    if cfg.ordering is None:
        return default_ordering(names, class_column)
    pos = {n: k for k, n in enumerate(cfg.ordering)}
    unknown = [n for n in names if n not in pos]
    if unknown:
        raise ValueError(f"ordering does not mention {unknown}")
    return tuple(sorted(range(len(names)), key=lambda i: pos[names[i]]))


def fit_local_model(local: DataTable, class_column: str, cfg: LearningConfig = LearningConfig(),
                    parameter_table: DataTable | None = None, party_id=None) -> LocalModel:
    """Discretize, learn a K2 structure and fit parameters on one data holder's table."""
    cls = local.column(class_column)
    if not isinstance(cls, Variable):
        raise TypeError(f"class column {class_column!r} must be categorical")
    observed = np.unique(local.data[:, local.column_index(class_column)])
    observed = observed[~np.isnan(observed)]
    if len(observed) < 2:
        who = f"party {party_id}" if party_id is not None else "training table"
        raise DegeneratePartyError(f"{who} observes a single class label")
    t0 = time.perf_counter()
    spec = fit_discretizer(local, cfg.min_fraction)
    disc = spec.apply(local)
    structure = k2_search(disc, K2Config(_ordering(disc.names, class_column, cfg), cfg.max_parents))
    t1 = time.perf_counter()
    fit_on = disc if parameter_table is None else spec.apply(parameter_table.select(local.names))
    net = fit_parameters(structure, fit_on, cfg.em)
    t2 = time.perf_counter()
    return LocalModel(net, spec, class_column, {"structure": t1 - t0, "parameters": t2 - t1})


@dataclass(frozen=True, eq=False)
class Member:
    model: LocalModel
    weight: float = 1.0
    party_id: int | None = None

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError("member weights must be positive")


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    members: tuple[Member, ...]
    class_variable: Variable
    voting: str = "soft"

    def __post_init__(self):
        if not self.members:
            raise ValueError("an ensemble needs at least one member")
        for m in self.members:
            if m.model.network.variable(self.class_variable.name) != self.class_variable:
                raise ValueError("every member must model the class variable")

    def reweighted(self, weights: Sequence[float]) -> "EnsembleModel":
        members = tuple(Member(m.model, w, m.party_id) for m, w in zip(self.members, weights, strict=True))
        return EnsembleModel(members, self.class_variable, self.voting)


def train_fbne(table: DataTable, parties: Sequence[PartyView], cfg: LearningConfig = LearningConfig(),
               rows: np.ndarray | None = None) -> EnsembleModel:
    """One network per party on its own columns and rows (restricted to ``rows``)."""
    members = []
    for party in parties:
        local = party.local(table, rows)
        params = party.parameter_slice(table, rows) if party.parameter_rows is not None else None
        model = fit_local_model(local, party.class_column, cfg, params, party.party_id)
        members.append(Member(model, 1.0, party.party_id))
    cls = table.column(parties[0].class_column)
    return EnsembleModel(tuple(members), cls, cfg.voting)


def _hard_vote(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    out[np.arange(len(p)), np.argmax(p, axis=1)] = 1.0
    return out


def member_probabilities(ensemble: EnsembleModel, records: DataTable) -> list[np.ndarray]:
    return [m.model.predict_proba(records) for m in ensemble.members]


def aggregate(ensemble: EnsembleModel, member_probs: Sequence[np.ndarray], seed=None,
              session: SecureSumSession | None = None) -> np.ndarray:
    if ensemble.voting == "hard":
        member_probs = [_hard_vote(p) for p in member_probs]
    session = session or SecureSumSession(len(ensemble.members), seed=seed)
    out = secure_weighted_sum(session, [(p, m.weight) for p, m in zip(member_probs, ensemble.members)])
    # Fixed-point rounding can leave the total a few 1e-10 away from one.
    return out / out.sum(axis=-1, keepdims=True)


def predict(ensemble: EnsembleModel, records: DataTable, seed=None) -> np.ndarray:
    """Class distribution per record: the weighted average of member posteriors.

    Each member only reads its own columns; missing cells are unobserved
    evidence, and a member whose evidence is impossible votes its prior.
    """
    return aggregate(ensemble, member_probabilities(ensemble, records), seed)


def synthetic_bootstrap(net: BayesianNetwork, n: int, cfg: LearningConfig | None = None, seed=None) -> BayesianNetwork:
    """Refit ``net``'s parameters on ``n`` records sampled from it."""
    sample = forward_sample(net, n, seed)
    return fit_parameters_mle(net.parents, sample)


@dataclass(frozen=True, eq=False)
class BaselineSuite:
    local_models: tuple[LocalModel, ...]
    central_model: LocalModel
    vertibayes_equivalent: LocalModel


def train_central(table: DataTable, class_column: str, cfg: LearningConfig = LearningConfig(),
                  rows: np.ndarray | None = None) -> LocalModel:
    pooled = table if rows is None else table.select(rows=rows)
    return fit_local_model(pooled, class_column, cfg)


def vertibayes_like(central: LocalModel, training: DataTable, cfg: LearningConfig, seed=None) -> LocalModel:
    """Central model, refit on synthetic data when the training data had gaps."""
    if not np.any(training.missing):
        return central
    t0 = time.perf_counter()
    n = cfg.bootstrap_size or training.n_rows
    net = synthetic_bootstrap(central.network, n, cfg, seed)
    timings = dict(central.timings)
    timings["parameters"] = timings.get("parameters", 0.0) + time.perf_counter() - t0
    return LocalModel(net, central.discretizer, central.class_column, timings)


def train_baselines(table: DataTable, parties: Sequence[PartyView], cfg: LearningConfig = LearningConfig(),
                    rows: np.ndarray | None = None, seed=None,
                    ensemble: EnsembleModel | None = None) -> BaselineSuite:
    class_column = parties[0].class_column
    if ensemble is None:
        ensemble = train_fbne(table, parties, cfg, rows)
    central = train_central(table, class_column, cfg, rows)
    training = table if rows is None else table.select(rows=rows)
    return BaselineSuite(
        tuple(m.model for m in ensemble.members),
        central,
        vertibayes_like(central, training, cfg, seed),
    )
