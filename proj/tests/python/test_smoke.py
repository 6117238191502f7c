import itertools
import math

import numpy as np
import pytest

import hdsl


def two_class_dataset():
    rows, labels = [], []
    for i in range(12):
        a, b = sorted({i % 3, (i + 1) % 3})
        rows.append({a: 0.1 + 0.05 * i, b: 0.3})
        labels.append(0)
        rows.append({a + 3: 0.1 + 0.05 * i, b + 3: 0.3})
        labels.append(1)
    return hdsl.Dataset(rows, 6, labels)


def test_smoothed_hinge_values():
    assert hdsl.smoothed_hinge(1.5) == 0.0
    assert hdsl.smoothed_hinge(-0.5) == 1.0
    assert hdsl.smoothed_hinge(0.5) == 0.125
    assert hdsl.smoothed_hinge_deriv(0.25) == -0.75


def test_model_similarity_and_matrix():
    m = hdsl.Model(2.0, 4, [("P", 0, 1, 0.5), ("N", 2, 3, 0.5)])
    assert m.atom_count == 2
    assert m.feature_count == 4
    assert m.similarity({0: 1.0}, {1: 1.0}) == pytest.approx(1.0)
    assert m.similarity({2: 1.0}, {3: 1.0}) == pytest.approx(-1.0)
    assert len(m.matrix_entries()) == 8
    with pytest.raises(ValueError):
        hdsl.Model(1.0, 4, [("P", 0, 1, 0.4)])


def test_serialization_round_trip(tmp_path):
    m = hdsl.Model(3.0, 10, [("P", 1, 4, 0.25), ("N", 2, 9, 0.75)])
    assert hdsl.Model.deserialize(m.serialize()) == m
    path = str(tmp_path / "m.hdsl")
    m.save(path)
    assert hdsl.Model.load(path) == m
    with pytest.raises(OSError):
        hdsl.Model.load(str(tmp_path / "missing.hdsl"))


def test_projection_reproduces_similarity():
    rng = np.random.default_rng(3)
    truth = hdsl.gen_truth(40, 8, seed=1)
    rows = []
    for _ in range(15):
        idx = rng.choice(40, size=6, replace=False)
        rows.append({int(i): float(v) for i, v in zip(idx, rng.uniform(-1, 1, size=6))})
    ds = hdsl.Dataset(rows, 40)
    z = truth.project(ds)
    assert z.shape == (15, truth.atom_count)
    for a, b in itertools.combinations(range(15), 2):
        assert z[a] @ z[b] == pytest.approx(truth.similarity(rows[a], rows[b]), abs=1e-10)
    for a in range(15):
        assert truth.similarity(rows[a], rows[a]) >= -1e-10


def test_train_on_separable_data():
    ds = two_class_dataset()
    triplets = hdsl.neighbors_triplets(ds, 3, 5)
    assert len(triplets) > 0
    model, history = hdsl.train(ds, triplets, lam=10.0, max_iters=60, seed=1)
    assert history[0]["k"] == 0
    assert len(history) <= 61
    objectives = [r["objective"] for r in history]
    assert all(b <= a + 1e-12 for a, b in zip(objectives, objectives[1:]))
    for r in history:
        assert r["atoms"] <= r["k"] + 1
    assert model.atom_count <= len(history)
    assert math.isclose(sum(a[3] for a in model.atoms), 1.0, abs_tol=1e-9)
    assert hdsl.knn_error(model, ds, ds, k=3) == 0.0

    again, _ = hdsl.train(ds, triplets, lam=10.0, max_iters=60, seed=1)
    assert again == model


def test_solver_preconditions():
    ds = two_class_dataset()
    with pytest.raises(ValueError):
        hdsl.train(ds, [(0, 2, 1)], lam=-1.0)
    with pytest.raises(ValueError):
        hdsl.train(ds, [(0, 2, 1)], oracle="minibatch", batch_size=5)
    with pytest.raises(ValueError):
        hdsl.train(ds, [(0, 2, 1)], oracle="nonsense")


def test_recovery_pipeline_small():
    truth = hdsl.gen_truth(60, 5, seed=2)
    samples = hdsl.gen_uniform_sparse(150, 60, 0.2, seed=2)
    triplets = hdsl.truth_triplets(samples, truth, 0.1, 1500, seed=2)
    model, _ = hdsl.train(samples, triplets, lam=50.0, max_iters=150, oracle="exact", seed=2)
    assert hdsl.feature_recovery_auc(model, truth) > 0.8
    assert 0.0 <= hdsl.entry_recovery_auc(model, truth) <= 1.0


def test_libsvm_round_trip(tmp_path):
    ds = two_class_dataset()
    path = str(tmp_path / "d.svm")
    hdsl.save_libsvm(ds, path)
    back = hdsl.load_libsvm(path, 6)
    assert len(back) == len(ds)
    assert back.labels == ds.labels
    assert back.rows() == ds.rows()
    with pytest.raises(OSError):
        hdsl.load_libsvm(str(tmp_path / "nope.svm"))
