import json
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gridstart.ml.data import Dataset, dumps_dataset, load_dataset, save_dataset
from gridstart.ml.knn import KnnRegressor
from gridstart.ml.linear import LinearRegressor
from gridstart.ml.metrics import r2_per_target, r2_score
from gridstart.ml.mlp import MlpParams, MlpRegressor, TrainingDiverged, init_params, loss_and_grad, train
from gridstart.ml.models import (FAMILIES, ModelFormatError, dumps_model, fit_knn, fit_linear, fit_mlp,
                                 fit_model, fit_svr, fit_tree, load_model, loads_model, save_model, with_meta)
from gridstart.ml.search import GridSearchSpec, cross_validate, grid_search, kfold_indices, tune_and_fit
from gridstart.ml.svr import SvrRegressor
from gridstart.ml.tree import LEAF, TreeRegressor

finite = st.floats(-1e3, 1e3, allow_nan=False)


def one_d(x, y):
    return Dataset(np.asarray(x, float)[:, None], np.asarray(y, float)[:, None], ("x",), ("y",))


def plane(n=40, seed=0, noise=0.0):
    rng = np.random.default_rng(seed)
    X = rng.uniform([0, 0], [600, 80], size=(n, 2))
    Y = np.column_stack([1.0 - 1e-4 * X[:, 0] + 3e-4 * X[:, 1], 0.9 * X[:, 0] + 0.1 * X[:, 1]])
    Y += noise * rng.normal(size=Y.shape)
    return Dataset(X, Y, ("p", "q"), ("v", "pg"))


# r2

def test_r2_examples():
    y = np.array([0.0, 1.0, 2.0])
    assert r2_score(y, y) == 100.0
    assert r2_score(y, np.full(3, y.mean())) == 0.0
    assert r2_score(y, [0.0, 1.0, 4.0]) == pytest.approx(-100.0)


@pytest.mark.parametrize("y_true,y_pred", [([1.0], [1.0]), ([2.0, 2.0], [1.0, 2.0]), ([1.0, 2.0], [1.0])])
def test_r2_rejects(y_true, y_pred):
    with pytest.raises(ValueError):
        r2_score(y_true, y_pred)


@given(arrays(float, 8, elements=finite), arrays(float, 8, elements=finite),
       st.floats(1e-2, 1e2), st.floats(-1e3, 1e3))
def test_r2_affine_invariant(y, p, a, b):
    if np.ptp(y) < 1e-3:
        return
    assert r2_score(y, y) == 100.0
    assert r2_score(a * y + b, a * p + b) == pytest.approx(r2_score(y, p), rel=1e-6, abs=1e-6)


def test_r2_per_target_columns():
    Y = np.array([[0.0, 1.0], [1.0, 3.0], [2.0, 2.0]])
    P = np.array([[0.0, 2.0], [1.0, 2.0], [2.0, 2.0]])
    np.testing.assert_allclose(r2_per_target(Y, P), [100.0, r2_score(Y[:, 1], P[:, 1])])


# dataset

def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((0, 2)), np.zeros((0, 1)), ("a", "b"), ("c",))
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), np.zeros((2, 1)), ("a", "a"), ("c",))
    with pytest.raises(ValueError):
        Dataset(np.array([[0.0, np.nan]]), np.zeros((1, 1)), ("a", "b"), ("c",))
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), np.zeros((3, 1)), ("a", "b"), ("c",))


def test_dataset_csv_round_trip(tmp_path):
    data = plane(noise=1e-3)
    save_dataset(data, tmp_path / "d.csv")
    back = load_dataset(tmp_path / "d.csv")
    assert back.feature_names == data.feature_names and back.target_names == data.target_names
    assert np.array_equal(back.X, data.X) and np.array_equal(back.Y, data.Y)
    assert dumps_dataset(back) == dumps_dataset(data)


# linear

def test_linear_exact_line():
    x = np.arange(10.0)
    m = LinearRegressor.fit(x[:, None], 2 * x + 1)
    assert m.predict(np.array([[0.0], [1.0]])) == pytest.approx([1.0, 3.0], abs=1e-10)
    # slope in the original units
    assert (m.predict(np.array([[5.0]]))[0] - m.predict(np.array([[4.0]]))[0]) == pytest.approx(2.0, abs=1e-10)


def test_linear_constant_target():
    X = np.random.default_rng(0).normal(size=(12, 2))
    m = LinearRegressor.fit(X, np.full(12, 4.5))
    np.testing.assert_allclose(m.weights, 0.0, atol=1e-12)
    np.testing.assert_allclose(m.predict(X), 4.5)


def test_linear_residual_orthogonal():
    data = plane(noise=0.05, seed=3)
    X1 = np.column_stack([np.ones(data.n), data.X])
    for k in range(2):
        m = LinearRegressor.fit(data.X, data.Y[:, k])
        grad = X1.T @ (m.predict(data.X) - data.Y[:, k])
        assert np.linalg.norm(grad) < 1e-8 * max(1.0, np.linalg.norm(X1.T @ data.Y[:, k]))
        ref, *_ = np.linalg.lstsq(X1, data.Y[:, k], rcond=None)
        np.testing.assert_allclose(m.predict(data.X), X1 @ ref, rtol=1e-9, atol=1e-9)


def test_linear_rank_deficient_uses_pinv():
    x = np.arange(8.0)
    X = np.column_stack([x, 2 * x])
    m = LinearRegressor.fit(X, 3 * x - 1)
    assert m.rank_deficient
    np.testing.assert_allclose(m.predict(X), 3 * x - 1, atol=1e-9)


def test_linear_needs_more_rows_than_features():
    with pytest.raises(ValueError):
        LinearRegressor.fit(np.eye(2), np.array([1.0, 2.0]))


# knn

def test_knn_hand_example():
    m = KnnRegressor.fit(np.array([[1.0], [2.0], [3.0], [100.0]]), np.array([1.0, 2.0, 3.0, 10.0]), k=3)
    assert m.predict(np.array([[2.0]]))[0] == pytest.approx(2.0)


def test_knn_k_equals_n_is_mean():
    data = plane(n=15)
    m = fit_knn(data, k=15)
    Q = np.array([[0.0, 0.0], [300.0, 40.0], [1e4, -5.0]])
    np.testing.assert_allclose(m.predict(Q), np.tile(data.Y.mean(axis=0), (3, 1)))


@pytest.mark.parametrize("weighting", ["uniform", "distance"])
def test_knn_k1_memorizes(weighting):
    data = plane(n=30, noise=0.01)
    m = fit_knn(data, k=1, weighting=weighting)
    assert np.array_equal(m.predict(data.X), data.Y)
    assert all(s == 100.0 for s in r2_per_target(data.Y, m.predict(data.X)))


def test_knn_distance_weighting_exact_match():
    data = plane(n=20, noise=0.01)
    m = fit_knn(data, k=5, weighting="distance")
    np.testing.assert_allclose(m.predict(data.X[3:4])[0], data.Y[3])


def test_knn_ties_by_index():
    m = KnnRegressor.fit(np.array([[0.0], [2.0], [-2.0]]), np.array([5.0, 7.0, 9.0]), k=2)
    idx, _ = m.neighbours(np.array([[0.0]]))
    assert idx[0].tolist() == [0, 1]
    _, dist = KnnRegressor.fit(m.x_std.inverse(m.Z), m.y, k=3).neighbours(np.array([[0.0]]))
    assert dist[0, 1] == dist[0, 2]
    assert m.predict(np.array([[0.0]]))[0] == 6.0


@pytest.mark.parametrize("k", [0, 4])
def test_knn_k_range(k):
    with pytest.raises(ValueError):
        KnnRegressor.fit(np.zeros((3, 1)) + np.arange(3)[:, None], np.arange(3.0), k=k)


def test_knn_query_latency():
    m = fit_knn(plane(n=300, noise=0.01), k=5)
    q = np.array([[250.0, 30.0]])
    m.predict_one(q)
    t = time.perf_counter()
    for _ in range(200):
        m.predict_one(q)
    assert (time.perf_counter() - t) / 200 < 1e-3


# tree

def test_tree_step_depth_one():
    x = np.linspace(-1, 1, 20)
    y = (x >= 0).astype(float)
    m = TreeRegressor.fit(x[:, None], y, max_depth=1)
    assert m.n_leaves == 2
    assert abs(m.threshold[0]) < 0.06
    assert r2_score(y, m.predict(x[:, None])) == 100.0


def test_tree_constant_target_single_leaf():
    m = TreeRegressor.fit(np.random.default_rng(1).normal(size=(10, 2)), np.full(10, 3.0))
    assert m.n_leaves == 1 and m.feature[0] == LEAF
    np.testing.assert_allclose(m.predict(np.zeros((1, 2))), 3.0)


def test_tree_memorizes():
    data = plane(n=50, noise=0.1)
    m = fit_tree(data)
    assert all(s == 100.0 for s in r2_per_target(data.Y, m.predict(data.X)))


@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.sampled_from([1, 2, 4, None]))
@settings(max_examples=30)
def test_tree_structure(seed, leaf, depth):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 6, size=(30, 2)).astype(float)
    y = rng.normal(size=30)
    m = TreeRegressor.fit(X, y, max_depth=depth, min_samples_leaf=leaf)
    internal = m.feature != LEAF
    # two children on every split, leaves are the only terminals
    assert np.all(m.left[internal] > 0) and np.all(m.right[internal] > 0)
    assert np.all(m.left[~internal] == LEAF) and np.all(m.right[~internal] == LEAF)
    if depth is not None:
        assert m.depth() <= depth
    leaves = m.apply(X)
    counts = np.bincount(leaves)
    assert counts[counts > 0].min() >= leaf
    for node in np.unique(leaves):
        assert m.value[node] == pytest.approx(y[leaves == node].mean())


def test_tree_leaf_size_precondition():
    with pytest.raises(ValueError):
        TreeRegressor.fit(np.arange(3.0)[:, None], np.arange(3.0), min_samples_leaf=2)


# svr

def test_svr_wide_tube_no_support():
    x = np.linspace(0, 1, 15)
    m = SvrRegressor.fit(x[:, None], 3 * x, epsilon=10.0)
    assert m.n_support == 0
    np.testing.assert_allclose(m.predict(x[:, None]), m.predict(np.array([[0.3]]))[0])


def test_svr_single_point():
    m = SvrRegressor.fit(np.array([[2.0]]), np.array([5.0]), epsilon=0.01)
    assert abs(m.predict(np.array([[2.0]]))[0] - 5.0) <= 0.01


def test_svr_sine_held_out():
    rng = np.random.default_rng(7)
    x = rng.uniform(0, 2 * np.pi, 120)
    xt = rng.uniform(0, 2 * np.pi, 60)
    m = SvrRegressor.fit(x[:, None], np.sin(x), C=10.0, epsilon=0.01, gamma=1.0)
    assert m.converged and m.kkt_gap < 1e-3
    assert r2_score(np.sin(xt), m.predict(xt[:, None])) >= 95.0


def test_svr_dual_box_and_tube():
    rng = np.random.default_rng(2)
    X = rng.uniform(-1, 1, size=(60, 2))
    y = X[:, 0] ** 2 - X[:, 1] + 0.05 * rng.normal(size=60)
    m = SvrRegressor.fit(X, y, C=1.0, epsilon=0.1, gamma=1.0)
    assert np.all(np.abs(m.coef) <= m.C + 1e-12)
    # training points outside the support set sit inside the tube (standardized units)
    Z = m.x_std.transform(X)
    outside = ~np.any(np.all(np.isclose(Z[:, None, :], m.support[None]), axis=2), axis=1)
    t = m.y_std.transform(y[:, None]).ravel()
    assert np.all(np.abs(m.decision(X)[outside] - t[outside]) <= m.epsilon + 2e-3)


@pytest.mark.parametrize("kw", [{"C": 0.0}, {"epsilon": -1.0}, {"gamma": 0.0}])
def test_svr_rejects_parameters(kw):
    with pytest.raises(ValueError):
        SvrRegressor.fit(np.arange(4.0)[:, None], np.arange(4.0), **kw)


# mlp

def test_mlp_zero_epochs_is_mean():
    data = plane(n=25, noise=0.1)
    m = fit_mlp(data, epochs=0)
    np.testing.assert_allclose(m.predict(data.X), np.tile(data.Y.mean(axis=0), (25, 1)), rtol=1e-12)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20)
def test_mlp_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(9, 2))
    t = rng.normal(size=9)
    p0 = init_params(2, 3, seed)
    p = MlpParams.unflat(p0.flat() + 0.5 * rng.normal(size=p0.flat().size), 2, 3)
    _, g = loss_and_grad(p, Z, t)
    v, gv = p.flat(), g.flat()
    h = 1e-6
    num = np.array([(loss_and_grad(MlpParams.unflat(v + h * e, 2, 3), Z, t)[0]
                     - loss_and_grad(MlpParams.unflat(v - h * e, 2, 3), Z, t)[0]) / (2 * h)
                    for e in np.eye(v.size)])
    assert np.max(np.abs(num - gv)) <= 1e-5 * max(1.0, np.max(np.abs(gv)))


def test_mlp_loss_non_increasing():
    rng = np.random.default_rng(4)
    Z = rng.normal(size=(40, 2))
    t = np.tanh(Z[:, 0]) - Z[:, 1] ** 2
    _, losses, _ = train(Z, (t - t.mean()) / t.std(), 8, 5.0, 300, 0)
    assert np.all(np.diff(losses) <= 0.0)


def test_mlp_linear_data():
    data = plane(n=60)
    m = fit_mlp(data, hidden=4, learning_rate=0.5, epochs=3000)
    assert all(s >= 99.9 for s in r2_per_target(data.Y, m.predict(data.X)))


def test_mlp_deterministic():
    data = plane(n=20, noise=0.1)
    a = fit_mlp(data, epochs=50, seed=3)
    b = fit_mlp(data, epochs=50, seed=3)
    assert np.array_equal(a.predict(data.X), b.predict(data.X))


def test_mlp_divergence_aborts():
    Z = np.zeros((3, 1))
    with pytest.raises(TrainingDiverged):
        train(Z, np.array([1e7, -1e7, 0.0]), 2, 0.1, 5, 0)


@pytest.mark.parametrize("kw", [{"hidden": 0}, {"learning_rate": 0.0}, {"epochs": -1}])
def test_mlp_rejects_parameters(kw):
    with pytest.raises(ValueError):
        MlpRegressor.fit(np.arange(4.0)[:, None], np.arange(4.0), **kw)


# common contract and persistence

def _fitted(family, data):
    params = {"lr": {}, "knn": {"k": 3}, "dtr": {"max_depth": 4}, "svm": {"C": 10.0, "epsilon": 0.01, "gamma": 1.0},
              "nn": {"hidden": 4, "learning_rate": 0.1, "epochs": 100}}[family]
    return fit_model(family, data, params)


@pytest.mark.parametrize("family", FAMILIES)
def test_model_round_trip_bit_exact(family, tmp_path):
    data = plane(n=30, noise=0.01)
    model = with_meta(_fitted(family, data), variant="congested")
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    Q = np.random.default_rng(9).uniform([0, 0], [610, 80], size=(25, 2))
    assert np.array_equal(back.predict(Q), model.predict(Q))
    assert back.meta == {"variant": "congested"}
    assert back.hyperparameters() == model.hyperparameters()
    assert dumps_model(back) == dumps_model(model)


@pytest.mark.parametrize("family", FAMILIES)
def test_predictions_deterministic(family):
    data = plane(n=30, noise=0.01)
    a, b = _fitted(family, data), _fitted(family, data)
    assert np.array_equal(a.predict(data.X), b.predict(data.X))
    assert a.predict_one(data.X[0]) == dict(zip(data.target_names, a.predict(data.X[:1])[0]))


def test_model_format_errors():
    text = dumps_model(fit_linear(plane()))
    d = json.loads(text)
    for key, value in [("format", "other"), ("version", 99), ("family", "rf")]:
        bad = dict(d, **{key: value})
        with pytest.raises(ModelFormatError):
            loads_model(json.dumps(bad))
    with pytest.raises(ModelFormatError):
        loads_model("not json")


def test_per_target_hyperparameters():
    data = plane(n=30)
    m = fit_model("knn", data, [{"k": 1}, {"k": 7, "weighting": "distance"}])
    assert m.hyperparameters() == {"v": {"k": 1, "weighting": "uniform"}, "pg": {"k": 7, "weighting": "distance"}}
    with pytest.raises(ValueError):
        fit_model("knn", data, [{"k": 1}])


# grid search

def test_kfold_partition():
    parts = kfold_indices(23, 5, 4)
    assert sorted(np.concatenate(parts).tolist()) == list(range(23))
    assert {len(p) for p in parts} <= {4, 5}
    assert all(np.array_equal(a, b) for a, b in zip(parts, kfold_indices(23, 5, 4)))
    with pytest.raises(ValueError, match="folds exceed samples"):
        kfold_indices(3, 5, 0)
    with pytest.raises(ValueError):
        GridSearchSpec("knn", {"k": [1]}, folds=1)
    with pytest.raises(ValueError):
        GridSearchSpec("knn", {"k": []})


def test_single_combination_returned():
    res = grid_search(GridSearchSpec("knn", {"k": [4]}), plane(n=30, noise=0.01))
    assert res.best_params == {"k": 4} and len(res.scores) == 1


def test_tie_returns_first():
    res = grid_search(GridSearchSpec("knn", {"k": [3, 3]}), plane(n=30, noise=0.01))
    assert res.scores[0].mean == res.scores[1].mean
    assert res.best_params == {"k": 3} and res.best_score == res.scores[0].mean


def test_failing_fold_scores_minus_infinity():
    data = plane(n=20)
    res = grid_search(GridSearchSpec("knn", {"k": [30, 2]}), data)
    assert res.scores[0].mean == -np.inf and res.scores[0].error
    assert res.best_params == {"k": 2}


def test_knn_grid_all_scored():
    data = plane(n=60, noise=0.01)
    res = grid_search(GridSearchSpec.default("knn"), data)
    assert len(res.scores) == 30
    assert {s.params["k"] for s in res.scores} == set(range(1, 16))
    assert res.best_score == max(s.mean for s in res.scores)


@given(st.sets(st.integers(1, 12), min_size=1, max_size=6), st.sets(st.integers(1, 12), max_size=6))
@settings(max_examples=15)
def test_superset_never_worse(base, extra):
    data = plane(n=40, noise=0.05, seed=5)
    small = grid_search(GridSearchSpec("knn", {"k": sorted(base)}), data)
    big = grid_search(GridSearchSpec("knn", {"k": sorted(base | extra)}), data)
    assert big.best_score >= small.best_score


def test_tune_per_target():
    data = plane(n=40, noise=0.01)
    model, results = tune_and_fit("knn", data, {"k": [1, 3, 5]}, folds=4)
    assert set(results) == {"v", "pg"}
    assert model.hyperparameters() == {t: dict(r.best_params, weighting="uniform") for t, r in results.items()}
    parts = kfold_indices(data.n, 4, 0)
    assert cross_validate("knn", data.select_targets(["pg"]), results["pg"].best_params, parts).mean == \
        results["pg"].best_score
