import numpy as np
import pytest

from fbne.bif import builtin_asia
from fbne.bn import BayesianNetwork, Cpt, forward_sample
from fbne.data import DiscretizationSpec, inject_missing, load_csv
from fbne.ensemble import (
    DegeneratePartyError,
    EnsembleModel,
    LearningConfig,
    LocalModel,
    Member,
    aggregate,
    fit_local_model,
    member_probabilities,
    predict,
    synthetic_bootstrap,
    train_baselines,
    train_fbne,
    vertibayes_like,
)
from fbne.federation import PartyView, SplitPlan, make_parties, split_vertical
from fbne.harness import fixtures_dir
from fbne.inference import posterior
from fbne.table import DataTable, Variable

from conftest import enumerate_joint

CLS = "lung"


@pytest.fixture(scope="module")
def asia():
    return forward_sample(builtin_asia(), 4000, 8)


@pytest.fixture(scope="module")
def vertical(asia):
    parties = split_vertical(asia, 2, seed=1, class_column=CLS)
    return parties, train_fbne(asia, parties)


def test_members_cover_their_party(vertical):
    parties, ens = vertical
    assert len(ens.members) == 2
    for p, m in zip(parties, ens.members):
        assert set(m.model.columns) == set(p.columns)
        assert m.weight == 1.0


def test_singleton_equals_member_posterior(asia):
    party = PartyView(1, tuple(asia.names), np.arange(asia.n_rows), CLS)
    ens = train_fbne(asia, [party])
    records = inject_missing(asia.select(rows=np.arange(60)), 0.3, 1, exempt=[CLS])
    out = predict(ens, records, seed=0)
    net = ens.members[0].model.network
    for row, p in zip(records.codes, out):
        ev = {v.name: v.states[c] for v, c in zip(records.columns, row) if c >= 0 and v.name != CLS}
        np.testing.assert_allclose(p, posterior(net, CLS, ev), atol=1e-9)


def test_equal_member_vectors_pass_through(vertical):
    _, ens = vertical
    v = np.array([[0.3, 0.7], [0.9, 0.1]])
    np.testing.assert_allclose(aggregate(ens.reweighted([2.0, 5.0]), [v, v], seed=1), v, atol=1e-9)


def test_two_member_arithmetic(vertical):
    _, ens = vertical
    out = aggregate(ens, [np.array([[0.8, 0.2]]), np.array([[0.4, 0.6]])], seed=2)
    np.testing.assert_allclose(out, [[0.6, 0.4]], atol=1e-9)


def test_predict_matches_plaintext_mean(vertical, asia):
    _, ens = vertical
    ens = ens.reweighted([1.0, 3.0])
    probs = member_probabilities(ens, asia)
    oracle = (probs[0] + 3 * probs[1]) / 4
    np.testing.assert_allclose(predict(ens, asia, seed=3), oracle, atol=1e-6)


def test_weight_scaling_and_member_order(vertical, asia):
    _, ens = vertical
    base = predict(ens.reweighted([1.0, 2.0]), asia, seed=0)
    for c in (0.37, 3.0, 1e3):
        scaled = predict(ens.reweighted([c, 2 * c]), asia, seed=5)
        assert np.array_equal(scaled.argmax(axis=1), base.argmax(axis=1))
        np.testing.assert_allclose(scaled, base, atol=1e-9)
    flipped = EnsembleModel(tuple(reversed(ens.reweighted([1.0, 2.0]).members)), ens.class_variable)
    np.testing.assert_allclose(predict(flipped, asia, seed=4), base, atol=1e-9)


def test_valid_distributions_at_thirty_percent_missing(vertical, asia):
    _, ens = vertical
    out = predict(ens, inject_missing(asia, 0.3, 9, exempt=[CLS]), seed=0)
    assert np.all(out >= 0)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-9)


def test_zero_evidence_member_votes_prior():
    y = Variable("y", ("a", "b"))
    x = Variable("x", ("p", "q"))
    net = BayesianNetwork([Cpt(y, (), [0.3, 0.7]), Cpt(x, (y,), [[1.0, 0.0], [1.0, 0.0]])])
    model = LocalModel(net, DiscretizationSpec({}), "y")
    records = DataTable.from_codes((y, x), np.array([[0, 1], [0, 0]]))
    out = model.predict_proba(records)
    np.testing.assert_allclose(out[0], [0.3, 0.7])
    np.testing.assert_allclose(out[1], [0.3, 0.7])


def test_replicated_horizontal_members_share_structure():
    t = forward_sample(builtin_asia(), 5000, 2)
    rep = DataTable(t.columns, np.concatenate([t.data] * 3))
    parties = [PartyView(k + 1, tuple(t.names), np.arange(k * 5000, (k + 1) * 5000), CLS) for k in range(3)]
    ens = train_fbne(rep, parties)
    nets = [m.model.network for m in ens.members]
    assert nets[0].same_structure(nets[1]) and nets[1].same_structure(nets[2])


def test_degenerate_party_named():
    t = forward_sample(builtin_asia(), 400, 2)
    no_lung = np.flatnonzero(t.data[:, t.column_index(CLS)] == 1)
    party = PartyView(7, tuple(t.names), no_lung, CLS)
    with pytest.raises(DegeneratePartyError, match="party 7"):
        train_fbne(t, [party])


def test_hard_voting():
    y = Variable("y", ("a", "b"))
    x = Variable("x", ("p", "q"))
    net = BayesianNetwork([Cpt(y, (), [0.5, 0.5]), Cpt(x, (y,), [[0.5, 0.5], [0.5, 0.5]])])
    model = LocalModel(net, DiscretizationSpec({}), "y")
    ens = EnsembleModel((Member(model), Member(model), Member(model)), y, voting="hard")
    probs = [np.array([[0.6, 0.4]]), np.array([[0.55, 0.45]]), np.array([[0.1, 0.9]])]
    np.testing.assert_allclose(aggregate(ens, probs, seed=0), [[2 / 3, 1 / 3]], atol=1e-9)
    with pytest.raises(ValueError):
        LearningConfig(voting="ranked")


def test_member_weight_validation(vertical):
    _, ens = vertical
    with pytest.raises(ValueError):
        ens.reweighted([1.0, 0.0])
    with pytest.raises(ValueError):
        EnsembleModel((), ens.class_variable)


def test_synthetic_bootstrap_convergence():
    net = builtin_asia()
    n = 50000
    refit = synthetic_bootstrap(net, n, seed=1)
    assert refit.same_structure(net)
    joint = enumerate_joint(net)
    for i, (truth, got) in enumerate(zip(net.cpts, refit.cpts)):
        ps = net.parents[i]
        expected = np.zeros(truth.table.shape[:-1])
        for states, p in joint:
            expected[tuple(states[q] for q in ps)] += n * p
        well_sampled = expected >= 5000
        assert np.all(np.abs(got.table - truth.table)[well_sampled] <= 0.02)
    small = synthetic_bootstrap(net, 10, seed=2)
    for cpt in small.cpts:
        np.testing.assert_allclose(cpt.table.sum(axis=-1), 1.0)
    again = synthetic_bootstrap(net, 10, seed=2)
    assert all(np.array_equal(a.table, b.table) for a, b in zip(small.cpts, again.cpts))


def test_baselines_without_and_with_missing(asia):
    parties = split_vertical(asia, 2, seed=1, class_column=CLS)
    suite = train_baselines(asia, parties, seed=0)
    assert suite.vertibayes_equivalent is suite.central_model
    assert len(suite.local_models) == 2
    gappy = inject_missing(asia, 0.1, 3, exempt=[CLS])
    suite = train_baselines(gappy, parties, seed=0)
    vb, central = suite.vertibayes_equivalent, suite.central_model
    assert vb.network.same_structure(central.network)
    assert not all(np.array_equal(a.table, b.table) for a, b in zip(vb.network.cpts, central.network.cpts))


def test_iris_local_model_discretizes():
    iris = load_csv(fixtures_dir() / "iris.csv", categorical=["species"])
    model = fit_local_model(iris, "species")
    p = model.predict_proba(iris)
    assert p.shape == (150, 3)
    assert np.mean(p.argmax(axis=1) == iris.data[:, -1]) > 0.9


def test_shared_overlap_fits_parameters_on_all_rows():
    t = forward_sample(builtin_asia(), 3000, 5)
    plan_l = SplitPlan("hybrid", 3, hybrid_mode="local-only", seed=2)
    plan_s = SplitPlan("hybrid", 3, hybrid_mode="shared-overlap", seed=2)
    local = train_fbne(t, make_parties(t, plan_l, CLS))
    shared = train_fbne(t, make_parties(t, plan_s, CLS))
    assert local.members[0].model.network.same_structure(shared.members[0].model.network)
    a, b = shared.members[1].model.network, shared.members[2].model.network
    if a.same_structure(b):
        assert all(np.array_equal(x.table, y.table) for x, y in zip(a.cpts, b.cpts))
    assert not all(np.array_equal(x.table, y.table)
                   for x, y in zip(local.members[1].model.network.cpts, shared.members[1].model.network.cpts))
