"""Exact inference for discrete Bayesian networks.

Two engines share one factor contraction helper:

* ``posterior`` answers a single query with variable elimination under a
  min-degree ordering.
* ``JunctionTree`` runs the same computation for a whole batch of partially
  observed records at once. Evidence enters as per-row indicator vectors
  (all ones for a missing cell), so one pass over the clique tree serves
  every missingness pattern in the batch.
"""
from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

from .bn import BayesianNetwork, InvalidQueryError, ZeroEvidenceError
from .table import MISSING

DRIFT_TOLERANCE = 1e-6
_BATCH = -1
_CHUNK_CELLS = 4_000_000

Factor = tuple[tuple[int, ...], np.ndarray]


def contract(operands: Iterable[Factor], out: Sequence[int]) -> np.ndarray:
    """Multiply factors and sum out every label not in ``out``.

    Labels are arbitrary ints (``_BATCH`` marks the record axis); they are
    remapped to a compact range before calling ``np.einsum``.
    """
    operands = list(operands)
    labels: dict[int, int] = {}

    def local(scope):
        return [labels.setdefault(v, len(labels)) for v in scope]

    args = []
    for scope, arr in operands:
        args += [arr, local(scope)]
    out_local = local(out)
    if not args:
        return np.ones(())
    return np.einsum(*args, out_local, optimize=len(operands) > 2)


def min_degree_order(scopes: Iterable[Sequence[int]], eliminate: Iterable[int]) -> list[int]:
    """Greedy min-degree elimination order over the interaction graph."""
    adj: dict[int, set[int]] = {}
    for scope in scopes:
        for a in scope:
            adj.setdefault(a, set()).update(b for b in scope if b != a)
    todo = set(eliminate)
    order = []
    while todo:
        v = min(todo, key=lambda u: (len(adj.get(u, ())), u))
        nbrs = adj.pop(v, set())
        for a in nbrs:
            adj[a].discard(v)
            adj[a].update(nbrs - {a})
        todo.remove(v)
        order.append(v)
    return order


def _reduce(net: BayesianNetwork, evidence: Mapping[int, int]) -> list[Factor]:
    factors = []
    for i, cpt in enumerate(net.cpts):
        scope = net.parents[i] + (i,)
        arr = cpt.table
        for axis in reversed(range(len(scope))):
            v = scope[axis]
            if v in evidence:
                arr = np.take(arr, evidence[v], axis=axis)
        factors.append((tuple(v for v in scope if v not in evidence), arr))
    return factors


def eliminate(factors: list[Factor], order: Sequence[int]) -> list[Factor]:
    for v in order:
        touching = [f for f in factors if v in f[0]]
        if not touching:
            continue
        factors = [f for f in factors if v not in f[0]]
        scope = tuple(sorted(set().union(*(s for s, _ in touching)) - {v}))
        factors.append((scope, contract(touching, scope)))
    return factors


def posterior(
    net: BayesianNetwork, target: str, evidence: Mapping[str, str] | None = None
) -> np.ndarray:
    """Exact P(target | evidence) by variable elimination."""
    t = net.index(target)
    ev = net.encode(evidence or {})
    if t in ev:
        raise InvalidQueryError(f"target {target!r} is also observed")
    factors = _reduce(net, ev)
    hidden = [v for v in range(len(net.variables)) if v != t and v not in ev]
    order = min_degree_order((s for s, _ in factors), hidden)
    factors = eliminate(factors, order)
    unnorm = contract(factors, (t,))
    z = unnorm.sum()
    if not z > 0:
        raise ZeroEvidenceError(f"evidence {evidence!r} has probability zero")
    if not ev and abs(z - 1.0) > DRIFT_TOLERANCE:
        raise FloatingPointError(f"prior marginal of {target!r} drifted to total {z}")
    return unnorm / z


def evidence_probability(net: BayesianNetwork, evidence: Mapping[str, str]) -> float:
    ev = net.encode(evidence)
    factors = _reduce(net, ev)
    hidden = [v for v in range(len(net.variables)) if v not in ev]
    return float(contract(eliminate(factors, min_degree_order((s for s, _ in factors), hidden)), ()))


class JunctionTree:
    """Clique tree for batched exact inference over partially observed rows.

    Cliques come from min-degree triangulation of the moral graph and are
    joined by a maximum-weight spanning tree on separator size.
    """

    def __init__(self, net: BayesianNetwork):
        self.net = net
        n = len(net.variables)
        self.cards = [v.cardinality for v in net.variables]
        adj = [set() for _ in range(n)]
        for i, ps in enumerate(net.parents):
            fam = ps + (i,)
            for a in fam:
                adj[a].update(b for b in fam if b != a)
        raw = []
        work = [set(a) for a in adj]
        todo = set(range(n))
        while todo:
            v = min(todo, key=lambda u: (len(work[u]), u))
            nbrs = work[v]
            raw.append(frozenset(nbrs | {v}))
            for a in nbrs:
                work[a].discard(v)
                work[a].update(nbrs - {a})
            todo.remove(v)
        cliques: list[frozenset] = []
        for c in raw:
            if c not in cliques and not any(c < d for d in raw):
                cliques.append(c)
        self.cliques = [tuple(sorted(c)) for c in cliques]
        m = len(self.cliques)

        edges = sorted(
            (
                (-len(set(self.cliques[a]) & set(self.cliques[b])), a, b)
                for a in range(m)
                for b in range(a + 1, m)
            )
        )
        root_of = list(range(m))

        def find(x):
            while root_of[x] != x:
                root_of[x] = root_of[root_of[x]]
                x = root_of[x]
            return x

        self.neighbors: list[list[int]] = [[] for _ in range(m)]
        for _, a, b in edges:
            ra, rb = find(a), find(b)
            if ra != rb:
                root_of[ra] = rb
                self.neighbors[a].append(b)
                self.neighbors[b].append(a)

        # Each CPT and each evidence indicator lives in the smallest covering clique.
        def home(scope):
            s = set(scope)
            best = min((len(c), k) for k, c in enumerate(self.cliques) if s <= set(c))
            return best[1]

        self.family_home = [home(net.parents[i] + (i,)) for i in range(n)]
        self.var_home = [home((i,)) for i in range(n)]
        self.potentials = []
        for k, clique in enumerate(self.cliques):
            fs = [
                (net.parents[i] + (i,), net.cpts[i].table)
                for i in range(n)
                if self.family_home[i] == k
            ]
            fs.append((clique, np.ones([self.cards[v] for v in clique])))
            self.potentials.append(contract(fs, clique))
        self.evidence_at = [[v for v in range(n) if self.var_home[v] == k] for k in range(m)]
        self._orient_cache: dict[int, tuple[list[int], list[int]]] = {}
        self._max_clique_cells = max(int(np.prod([self.cards[v] for v in c])) for c in self.cliques)

    def separator(self, a: int, b: int) -> tuple[int, ...]:
        return tuple(sorted(set(self.cliques[a]) & set(self.cliques[b])))

    def _orient(self, root: int):
        if root not in self._orient_cache:
            parent = [-1] * len(self.cliques)
            order = [root]
            seen = {root}
            for k in order:
                for nb in self.neighbors[k]:
                    if nb not in seen:
                        seen.add(nb)
                        parent[nb] = k
                        order.append(nb)
            self._orient_cache[root] = (order, parent)
        return self._orient_cache[root]

    def _chunks(self, n_rows):
        size = max(1, _CHUNK_CELLS // max(self._max_clique_cells, 1))
        for start in range(0, n_rows, size):
            yield slice(start, min(n_rows, start + size))

    def _indicators(self, codes: np.ndarray) -> list[np.ndarray]:
        lam = []
        for v, r in enumerate(self.cards):
            col = codes[:, v]
            ind = np.ones((codes.shape[0], r))
            obs = col != MISSING
            ind[obs] = 0.0
            ind[np.flatnonzero(obs), col[obs]] = 1.0
            lam.append(ind)
        return lam

    def _local(self, k, lam, incoming):
        ops = [(self.cliques[k], self.potentials[k])]
        ops += [((_BATCH, v), lam[v]) for v in self.evidence_at[k]]
        ops += incoming
        return ops

    def _collect(self, root, lam, n_rows):
        order, parent = self._orient(root)
        msgs: dict[tuple[int, int], np.ndarray] = {}
        log_z = np.zeros(n_rows)
        for k in reversed(order[1:]):
            p = parent[k]
            sep = self.separator(k, p)
            incoming = [((_BATCH,) + self.separator(c, k), msgs[(c, k)])
                        for c in self.neighbors[k] if c != p]
            m = contract(self._local(k, lam, incoming), (_BATCH,) + sep)
            s = m.reshape(n_rows, -1).sum(axis=1)
            with np.errstate(divide="ignore"):
                log_z += np.log(s)
            s[s == 0] = 1.0
            msgs[(k, p)] = m / s.reshape((-1,) + (1,) * len(sep))
        return msgs, log_z

    def _root_incoming(self, k, msgs, exclude=None):
        return [((_BATCH,) + self.separator(c, k), msgs[(c, k)])
                for c in self.neighbors[k] if c != exclude]

    def query(self, codes: np.ndarray, target: int) -> tuple[np.ndarray, np.ndarray]:
        """Posterior of ``target`` for every row, plus each row's log P(evidence).

        Rows whose evidence has probability zero get ``-inf`` and a NaN row.
        Any observed value in the target column is ignored.
        """
        codes = np.asarray(codes, dtype=np.int64)
        n_rows = codes.shape[0]
        r = self.cards[target]
        post = np.empty((n_rows, r))
        log_p = np.empty(n_rows)
        root = self.var_home[target]
        for sl in self._chunks(n_rows):
            block = codes[sl].copy()
            block[:, target] = MISSING
            b = block.shape[0]
            lam = self._indicators(block)
            msgs, log_z = self._collect(root, lam, b)
            belief = contract(self._local(root, lam, self._root_incoming(root, msgs)), (_BATCH, target))
            s = belief.sum(axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                log_p[sl] = log_z + np.log(s)
                post[sl] = belief / s[:, None]
        return post, log_p

    def log_evidence(self, codes: np.ndarray) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64)
        out = np.empty(codes.shape[0])
        for sl in self._chunks(codes.shape[0]):
            block = codes[sl]
            lam = self._indicators(block)
            msgs, log_z = self._collect(0, lam, block.shape[0])
            tot = contract(self._local(0, lam, self._root_incoming(0, msgs)), (_BATCH,))
            with np.errstate(divide="ignore"):
                out[sl] = log_z + np.log(tot)
        return out

    def family_counts(
        self, codes: np.ndarray, weights: np.ndarray | None = None
    ) -> tuple[list[np.ndarray], float]:
        """Expected family counts summed over rows, and the total log-likelihood.

        Count arrays are shaped like the network's CPT tables.
        """
        net = self.net
        codes = np.asarray(codes, dtype=np.int64)
        n_rows = codes.shape[0]
        if weights is None:
            weights = np.ones(n_rows)
        counts = [np.zeros(cpt.table.shape) for cpt in net.cpts]
        total_ll = 0.0
        for sl in self._chunks(n_rows):
            block = codes[sl]
            w = weights[sl]
            b = block.shape[0]
            lam = self._indicators(block)
            msgs, log_z = self._collect(0, lam, b)
            order, parent = self._orient(0)
            root_belief = contract(self._local(0, lam, self._root_incoming(0, msgs)), (_BATCH,) + self.cliques[0])
            tot = root_belief.reshape(b, -1).sum(axis=1)
            if np.any(tot <= 0):
                raise ZeroEvidenceError("a training row has probability zero")
            total_ll += float(np.dot(w, log_z + np.log(tot)))
            # Downward pass, messages normalised per row.
            for k in order[1:]:
                p = parent[k]
                sep = self.separator(p, k)
                m = contract(self._local(p, lam, self._root_incoming(p, msgs, exclude=k)), (_BATCH,) + sep)
                s = m.reshape(b, -1).sum(axis=1)
                msgs[(p, k)] = m / s.reshape((-1,) + (1,) * len(sep))
            for k, clique in enumerate(self.cliques):
                belief = contract(self._local(k, lam, self._root_incoming(k, msgs)), (_BATCH,) + clique)
                z = belief.reshape(b, -1).sum(axis=1)
                scale = w / z
                for i in range(len(net.variables)):
                    if self.family_home[i] == k:
                        fam = net.parents[i] + (i,)
                        counts[i] += contract([((_BATCH,) + clique, belief), ((_BATCH,), scale)], fam)
        return counts, total_ll
