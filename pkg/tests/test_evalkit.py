import numpy as np
import pytest

from motifwalk import evalkit as ek
from motifwalk.molgraph import FP_BITS, morgan_fingerprint, parse_smiles
from motifwalk.walks import parse_walk
from oracles import pair_auc, r2_direct, tanimoto_sets


def _mols(*smiles):
    return [parse_smiles(s) for s in smiles]


def test_generation_metric_examples():
    train = _mols("CCO", "c1ccsc1", "CCN")
    r = ek.evaluate_generations(train, train)
    assert r.novel == 0.0 and r.valid == 1.0 and r.unique == 1.0
    r = ek.evaluate_generations(_mols("CCO") * 4, [])
    assert r.unique == 0.25 and r.diversity == 0.0
    r = ek.evaluate_generations(_mols("c1ccsc1", "CCO"), [], ["c1ccsc1"])
    assert r.membership == 0.5
    # SMILES spelling does not matter for novelty
    assert ek.evaluate_generations(_mols("OCC"), _mols("CCO")).novel == 0.0
    with pytest.raises(ValueError):
        ek.evaluate_generations([], [])


def test_default_membership_patterns():
    hopv = ek.DEFAULT_MEMBERSHIP["hopv"]
    ptc = ek.DEFAULT_MEMBERSHIP["ptc"]
    mols = _mols("CCCCc1ccc(-c2cccs2)s1", "ClCCO", "BrCCC", "Clc1ccccc1", "CCBr")
    assert [ek.has_pattern(m, _mols(*hopv)) for m in mols] == [True, False, False, False, False]
    assert [ek.has_pattern(m, _mols(*ptc)) for m in mols] == [False, True, True, False, True]


def test_diversity_matches_direct_formula():
    mols = _mols("CCO", "c1ccsc1", "CCN", "c1ccccc1O", "CC(=O)O")
    fps = [morgan_fingerprint(m) for m in mols]
    direct = np.mean([1 - tanimoto_sets(fps[i], fps[j]) for i in range(5) for j in range(i + 1, 5)])
    assert abs(ek.evaluate_generations(mols, []).diversity - direct) < 1e-12
    # adding an exact duplicate never increases diversity
    assert ek.evaluate_generations(mols + mols[:1], []).diversity <= direct + 1e-12
    assert ek.mean_pairwise_distance(np.array([fps[0]])) == 0.0


def test_bag_of_motifs_folds_duplicates(toy):
    graph, corpus = toy
    dag = parse_walk("G1->G3->G1:1", graph)
    f = ek.bag_of_motifs(dag, corpus.molecules[1], graph)
    assert f.counts.tolist() == [2, 0, 1, 0, 0]
    assert f.vector.shape == (len(graph.motifs) + FP_BITS,)
    assert np.array_equal(f.vector[: len(graph.motifs)], f.counts)


def test_best_split_finds_the_obvious_cut():
    X = np.array([[0.0, 5.0], [1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    assert ek.best_split(X, y) == (0, 1.5)
    assert ek.best_split(X[:, 1:], y) is None


def test_gbt_constant_target():
    X = np.random.default_rng(0).random((10, 3))
    m = ek.gbt_fit(X, np.full(10, 2.5))
    assert np.allclose(m.predict(X), 2.5)


def test_gbt_separable_classification():
    X = np.array([[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    m = ek.gbt_fit(X, y, task="classification")
    assert ek.evaluate_predictions(m.predict(X), y, "classification")["accuracy"] == 1.0
    assert all(b <= a + 1e-12 for a, b in zip(m.loss_trace, m.loss_trace[1:]))


def test_gbt_training_loss_never_increases():
    rng = np.random.default_rng(3)
    X = rng.integers(0, 4, size=(60, 6)).astype(float)
    y = X @ rng.normal(size=6) + rng.normal(0, 0.1, 60)
    m = ek.gbt_fit(X, y)
    assert all(b <= a + 1e-12 for a, b in zip(m.loss_trace, m.loss_trace[1:]))
    assert len(m.trees) == 16


def test_gbt_rejects_bad_input():
    with pytest.raises(ValueError):
        ek.gbt_fit(np.zeros((1, 2)), np.zeros(1))
    with pytest.raises(ValueError):
        ek.gbt_fit(np.zeros((3, 2)), np.array([0, 1, 2]), task="classification")


def test_prediction_metrics_match_direct_formulas():
    rng = np.random.default_rng(5)
    y = rng.normal(size=100)
    pred = y + rng.normal(0, 0.5, 100)
    m = ek.evaluate_predictions(pred, y)
    assert abs(m["mae"] - np.mean(np.abs(pred - y))) < 1e-10
    assert abs(m["r2"] - r2_direct(pred, y)) < 1e-10
    labels = (rng.random(100) < 0.4).astype(int)
    scores = np.round(rng.random(100), 1)  # with ties
    c = ek.evaluate_predictions(scores, labels, "classification")
    assert abs(c["auc"] - pair_auc(scores, labels)) < 1e-10
    assert abs(c["accuracy"] - np.mean((scores >= 0.5) == labels)) < 1e-10


def test_prediction_metric_examples():
    y = np.array([1.0, 2.0, 4.0])
    assert ek.evaluate_predictions(y, y) == {"mae": 0.0, "r2": 1.0}
    assert abs(ek.evaluate_predictions(np.full(3, y.mean()), y)["r2"]) < 1e-12
    with pytest.raises(ValueError):
        ek.auc_score([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        ek.evaluate_predictions([1.0], [1.0, 2.0])


def test_split_protocol_is_reproducible():
    rng = np.random.default_rng(9)
    X = rng.integers(0, 3, size=(50, 4)).astype(float)
    y = X @ np.array([1.0, -2.0, 0.5, 0.0])
    a = ek.split_protocol(X, y)
    b = ek.split_protocol(X, y)
    assert a == b
    assert [r["seed"] for r in a["runs"]] == [0, 1, 2]
    assert all(len(r["test"]) == 10 for r in a["runs"])
