import itertools
from pathlib import Path

import numpy as np
import pytest

from fbne.bn import BayesianNetwork
from fbne.table import Variable

FIXTURES = Path(__file__).with_name("fixtures")


def random_network(rng, n_nodes, max_parents=3, max_card=2, zeros=False):
    """DAG over nodes 0..n-1 with parents drawn from lower indices."""
    variables = [
        Variable(f"v{i}", tuple(f"s{k}" for k in range(rng.integers(2, max_card + 1))))
        for i in range(n_nodes)
    ]
    parents, tables = [], []
    for i in range(n_nodes):
        k = int(rng.integers(0, min(i, max_parents) + 1))
        ps = tuple(sorted(rng.choice(i, size=k, replace=False).tolist())) if k else ()
        shape = tuple(variables[p].cardinality for p in ps) + (variables[i].cardinality,)
        t = rng.dirichlet(np.ones(shape[-1]), size=shape[:-1]).reshape(shape)
        if zeros:
            t = np.where(rng.random(shape) < 0.15, 0.0, t)
            t[..., 0] += t.sum(axis=-1) == 0
            t = t / t.sum(axis=-1, keepdims=True)
        parents.append(ps)
        tables.append(t)
    return BayesianNetwork.from_structure(variables, tuple(parents), tables)


def enumerate_joint(net):
    """Every full assignment (as state indices) with its chain-rule probability."""
    cards = [v.cardinality for v in net.variables]
    out = []
    for states in itertools.product(*(range(c) for c in cards)):
        p = 1.0
        for cpt, ps, s in zip(net.cpts, net.parents, states):
            p *= cpt.table[tuple(states[q] for q in ps) + (s,)]
        out.append((states, p))
    return out


def brute_posterior(net, target, evidence):
    t = net.index(target)
    ev = {net.index(k): net.variable(k).index(v) for k, v in evidence.items()}
    acc = np.zeros(net.variables[t].cardinality)
    for states, p in enumerate_joint(net):
        if all(states[i] == s for i, s in ev.items()):
            acc[states[t]] += p
    return acc / acc.sum()


@pytest.fixture
def asia_bif_text():
    return (FIXTURES / "asia.bif").read_text()


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
