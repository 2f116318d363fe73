import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fbne.bif import builtin_asia
from fbne.bn import forward_sample, topological_order
from fbne.data import inject_missing
from fbne.inference import JunctionTree
from fbne.learning import (
    EmConfig,
    K2Config,
    em,
    family_counts,
    fit_parameters,
    fit_parameters_em,
    fit_parameters_mle,
    k2_score,
    k2_search,
    structure_score,
)
from fbne.table import DataTable, Variable

from conftest import random_network

BIN = ("t", "f")


def binary_table(codes, names=None):
    codes = np.asarray(codes)
    names = names or [f"x{j}" for j in range(codes.shape[1])]
    return DataTable.from_codes(tuple(Variable(n, BIN) for n in names), codes)


def factorial_k2(codes, child, parents, r=2):
    """Cooper-Herskovits score with explicit factorials."""
    total = 0.0
    for config in itertools.product(range(r), repeat=len(parents)):
        rows = codes[np.all(codes[:, list(parents)] == config, axis=1)] if parents else codes
        n_jk = [int(np.sum(rows[:, child] == k)) for k in range(r)]
        total += math.log(math.factorial(r - 1)) - math.log(math.factorial(sum(n_jk) + r - 1))
        total += sum(math.log(math.factorial(c)) for c in n_jk)
    return total


def test_mle_single_node_smoothing():
    net = fit_parameters_mle(((),), binary_table([[0], [0], [0], [1]]))
    np.testing.assert_allclose(net.cpts[0].table, [2 / 3, 1 / 3])


def test_mle_unseen_parent_config_is_uniform():
    net = fit_parameters_mle(((), (0,)), binary_table([[0, 0], [0, 1], [0, 0]]))
    np.testing.assert_allclose(net.cpts[1].table[1], [0.5, 0.5])


def test_mle_rejects_missing():
    with pytest.raises(ValueError):
        fit_parameters_mle(((),), binary_table([[0], [-1]]))


def test_asia_refit_close_to_truth():
    truth = builtin_asia()
    sample = forward_sample(truth, 10000, 3)
    net = fit_parameters_mle(truth.parents, sample)
    codes = sample.codes
    cards = [v.cardinality for v in truth.variables]
    for i, ps in enumerate(truth.parents):
        n_j = family_counts(codes, i, ps, cards).sum(axis=-1)
        diff = np.abs(net.cpts[i].table - truth.cpts[i].table)
        assert np.all(diff[n_j >= 200] <= 0.03)


def test_all_smoothed_entries_strictly_inside_unit_interval():
    rng = np.random.default_rng(4)
    truth = random_network(rng, 6, max_card=3)
    t = inject_missing(forward_sample(truth, 300, 1), 0.2, 2)
    for net in (fit_parameters_mle(truth.parents, forward_sample(truth, 30, 2)), fit_parameters(truth.parents, t)):
        for cpt in net.cpts:
            assert np.all((cpt.table > 0) & (cpt.table < 1))


def test_em_complete_data_equals_mle():
    truth = builtin_asia()
    t = forward_sample(truth, 2000, 9)
    res = em(truth.parents, t)
    mle = fit_parameters_mle(truth.parents, t)
    assert res.iterations == 1
    for a, b in zip(res.network.cpts, mle.cpts):
        assert np.array_equal(a.table, b.table)


def test_em_scalar_fixed_point():
    # 6 true, 2 false, 2 missing: p <- (6 + 2p + 1) / (10 + 2), fixed point 0.7.
    t = binary_table([[0]] * 6 + [[1]] * 2 + [[-1]] * 2)
    res = em(((),), t, EmConfig(max_iterations=200, log_likelihood_tolerance=1e-12))
    p = 7 / 10  # available-case start: (6 + 1) / (8 + 2)
    for _ in range(res.iterations - 1):
        p = (6 + 2 * p + 1) / 12
    assert res.network.cpts[0].table[0] == pytest.approx(p, abs=1e-12)
    assert res.network.cpts[0].table[0] == pytest.approx(0.7, abs=1e-9)


def test_em_scalar_iteration_oracle_from_nonfixed_start():
    t = binary_table([[0]] * 6 + [[1]] * 2 + [[-1]] * 2)
    cfg = EmConfig(max_iterations=5, log_likelihood_tolerance=1e-300)
    from fbne.learning import _run_em

    res = _run_em(((),), t, cfg, [np.array([0.2, 0.8])])
    p = 0.2
    for _ in range(5):
        p = (6 + 2 * p + 1) / 12
    assert res.network.cpts[0].table[0] == pytest.approx(p, abs=1e-12)


def test_em_beats_listwise_deletion_on_heldout():
    truth = builtin_asia()
    train = inject_missing(forward_sample(truth, 10000, 1), 0.10, 2)
    test = forward_sample(truth, 5000, 3)
    em_net = fit_parameters_em(truth.parents, train)
    complete = ~train.missing.any(axis=1)
    listwise = fit_parameters_mle(truth.parents, train.select(rows=np.flatnonzero(complete)))
    ll_em = JunctionTree(em_net).log_evidence(test.codes).sum()
    ll_lw = JunctionTree(listwise).log_evidence(test.codes).sum()
    assert ll_em > ll_lw


def test_em_all_missing_row_is_fine():
    t = binary_table([[0, 1], [1, 1], [-1, -1], [0, 0]])
    net = fit_parameters_em(((), (0,)), t)
    for cpt in net.cpts:
        np.testing.assert_allclose(cpt.table.sum(axis=-1), 1.0)


def test_em_rejects_unobserved_column():
    with pytest.raises(ValueError):
        em(((), ()), binary_table([[0, -1], [1, -1]]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_em_penalized_objective_never_decreases(seed):
    rng = np.random.default_rng(seed)
    truth = random_network(rng, int(rng.integers(2, 7)), max_card=3)
    t = inject_missing(forward_sample(truth, int(rng.integers(20, 300)), seed), float(rng.uniform(0.05, 0.5)), seed)
    res = em(truth.parents, t, EmConfig(max_iterations=30, log_likelihood_tolerance=1e-8))
    assert np.all(np.diff(res.objectives) >= -1e-9)


def test_k2_score_two_rows():
    assert k2_score(0, (), binary_table([[0], [1]])) == pytest.approx(math.log(1 / 6), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.integers(0, 1), min_size=3, max_size=3), min_size=8, max_size=8))
def test_k2_score_factorial_oracle(rows):
    codes = np.array(rows)
    t = binary_table(codes)
    for child in range(3):
        others = [v for v in range(3) if v != child]
        for k in range(3):
            for ps in itertools.combinations(others, k):
                assert k2_score(child, ps, t) == pytest.approx(factorial_k2(codes, child, ps), abs=1e-9)


def test_k2_score_row_permutation_invariant():
    rng = np.random.default_rng(0)
    codes = rng.integers(0, 2, size=(200, 3))
    a = k2_score(2, (0, 1), binary_table(codes))
    b = k2_score(2, (0, 1), binary_table(codes[rng.permutation(200)]))
    assert a == pytest.approx(b, abs=1e-9)


def test_independent_parent_does_not_help():
    rng = np.random.default_rng(1)
    t = binary_table(rng.integers(0, 2, size=(5000, 2)))
    assert k2_score(1, (0,), t) <= k2_score(1, (), t)
    assert k2_search(t) == ((), ())


def test_copy_edge_recovered():
    a = np.random.default_rng(2).integers(0, 2, size=1000)
    t = binary_table(np.stack([a, a], axis=1))
    assert k2_search(t, K2Config(ordering=(0, 1))) == ((), (0,))


def test_ordering_restricts_parents():
    a = np.random.default_rng(2).integers(0, 2, size=1000)
    t = binary_table(np.stack([a, a], axis=1))
    assert k2_search(t, K2Config(ordering=(1, 0))) == ((1,), ())


def test_max_parents_zero():
    a = np.random.default_rng(2).integers(0, 2, size=300)
    t = binary_table(np.stack([a, a, 1 - a], axis=1))
    assert k2_search(t, K2Config(max_parents=0)) == ((), (), ())


def test_k2_config_validation():
    with pytest.raises(ValueError):
        K2Config(max_parents=-1)
    with pytest.raises(ValueError):
        k2_search(binary_table([[0, 1]]), K2Config(ordering=(0, 0)))
    with pytest.raises(ValueError):
        EmConfig(max_iterations=0)
    with pytest.raises(ValueError):
        EmConfig(log_likelihood_tolerance=0)


def test_cache_does_not_change_result():
    t = forward_sample(builtin_asia(), 3000, 4)
    assert k2_search(t, K2Config(score_cache_enabled=True)) == k2_search(t, K2Config(score_cache_enabled=False))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.2]))
def test_k2_output_acyclic_and_no_worse_than_empty(seed, level):
    rng = np.random.default_rng(seed)
    truth = random_network(rng, 6, max_card=3)
    t = inject_missing(forward_sample(truth, 400, seed), level, seed)
    order = tuple(rng.permutation(6).tolist())
    s = k2_search(t, K2Config(ordering=order, max_parents=2))
    topological_order(s)
    pos = {v: k for k, v in enumerate(order)}
    assert all(pos[p] < pos[c] for c, ps in enumerate(s) for p in ps)
    if level == 0.0:
        assert structure_score(s, t) >= structure_score(((),) * 6, t)


def test_asia_structure_roughly_recovered():
    truth = builtin_asia()
    t = forward_sample(truth, 10000, 6)
    s = k2_search(t, K2Config(ordering=tuple(truth.order)))
    truth_edges = {(p, c) for c, ps in enumerate(truth.parents) for p in ps}
    found = {(p, c) for c, ps in enumerate(s) for p in ps}
    assert len(truth_edges & found) >= 6
