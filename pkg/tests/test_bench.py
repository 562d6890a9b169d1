import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from eln.bench import (
    CASES,
    METHODS,
    Gauss,
    GaussMixture,
    GridSearchSpec,
    LabelNoiseSpec,
    NoiseSpec,
    Uniform,
    accuracy,
    apply_label_noise,
    fold_ids,
    gaussian_blobs,
    gen_linear_problem,
    grid_search,
    grid_search_pooled,
    load_csv,
    load_grid_config,
    method_config,
    normalize,
    one_hot,
    rmsd,
    rmse,
    sample_noise,
    split,
    transition_matrix,
    valid_params,
    write_cv_table,
)


def tail(mean, var, t):
    # P(|X| > t) for X ~ N(mean, var)
    sd = math.sqrt(var)
    upper = 0.5 * math.erfc((t - mean) / (sd * math.sqrt(2)))
    lower = 0.5 * math.erfc((t + mean) / (sd * math.sqrt(2)))
    return upper + lower


def test_linear_problem():
    X, y = gen_linear_problem(1000, [2.0, 1.0], 0)
    assert np.all(np.abs(X) <= 2)
    np.testing.assert_allclose(y, 2 * X[:, 0] + X[:, 1])
    X2, _ = gen_linear_problem(1000, [2.0, 1.0], 0)
    np.testing.assert_array_equal(X, X2)
    X3, _ = gen_linear_problem(1, [2.0, 1.0], 1)
    assert X3.shape == (1, 2)


def test_noise_extremes():
    inner_only = NoiseSpec(0.0, Uniform(2.0, 3.0))
    v = sample_noise(inner_only, 1000, 1)
    assert np.all((v >= 2) & (v <= 3))
    outlier_only = NoiseSpec(1.0, Uniform(2.0, 3.0), Gauss(-50.0, 1.0))
    assert np.all(sample_noise(outlier_only, 1000, 1) < -40)


def test_case1_statistics():
    v = sample_noise(CASES[1], 100_000, 2)
    assert abs(v.mean()) < 0.15
    inner = 0.5 * tail(-5, 0.1, 3) + 0.5 * tail(5, 0.1, 3)
    expected = 0.9 * inner + 0.1 * tail(0, 100, 3)
    assert abs(np.mean(np.abs(v) > 3) - expected) < 0.02


def test_case_moments():
    n = 200_000
    for case, mean in ((2, (1 / 3) * -3 + (2 / 3) * 5), (3, 0.0), (4, 0.5)):
        v = sample_noise(CASES[case], n, 3)
        assert abs(v.mean() - 0.9 * mean) < 0.1


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(1.5, Gauss(0, 1))
    with pytest.raises(ValueError):
        Gauss(0, 0)
    with pytest.raises(ValueError):
        Uniform(1, 1)
    with pytest.raises(ValueError):
        GaussMixture(((0.5, 0, 1), (0.6, 1, 1)))


def test_seed_streams():
    a = sample_noise(CASES[1], 100, 5)
    np.testing.assert_array_equal(a, sample_noise(CASES[1], 100, 5))
    assert not np.array_equal(a, sample_noise(CASES[1], 100, 6))


def test_metrics():
    assert rmsd([2, 1], [2, 1]) == 0
    assert rmsd([3, 2], [2, 1]) == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal(7), rng.standard_normal(7)
    assert rmsd(a, b) == pytest.approx(math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)) / 7))
    t = rng.standard_normal(50)
    assert rmse(t, t) == 0
    assert rmse(t + 0.3, t) == pytest.approx(0.3)
    p = rng.standard_normal(50)
    assert rmse(p, t) == pytest.approx(math.sqrt(math.fsum((x - y) ** 2 for x, y in zip(p, t)) / 50))
    assert accuracy([1, 2, 3], [1, 2, 3]) == 1
    assert accuracy([0, 0], [1, 1]) == 0
    assert accuracy([0, 1, 0, 1], [0, 1, 1, 0]) == 0.5


def test_label_noise():
    labels = np.random.default_rng(0).integers(0, 4, 1000)
    np.testing.assert_array_equal(apply_label_noise(labels, LabelNoiseSpec(0.0, 4), 1), labels)
    np.testing.assert_array_equal(apply_label_noise(labels, LabelNoiseSpec(1.0, 4), 1), (labels + 1) % 4)
    big = np.random.default_rng(1).integers(0, 2, 100_000)
    noisy = apply_label_noise(big, LabelNoiseSpec(0.3, 2), 2)
    assert abs(np.mean(noisy != big) - 0.3) < 0.01
    with pytest.raises(ValueError):
        apply_label_noise([0, 5], LabelNoiseSpec(0.1, 3), 0)


@settings(max_examples=30)
@given(st.floats(0, 1), st.integers(2, 10))
def test_transition_rows_sum_to_one(eps, C):
    Q = transition_matrix(LabelNoiseSpec(eps, C))
    np.testing.assert_allclose(Q.sum(axis=1), 1.0)
    noisy = apply_label_noise(np.arange(C).repeat(3), LabelNoiseSpec(eps, C), 0)
    assert noisy.min() >= 0 and noisy.max() < C


def test_normalize():
    train = np.array([[0.0, 5.0], [2.0, 5.0], [4.0, 5.0]])
    test = np.array([[6.0, 1.0]])
    a, b = normalize(train, test)
    np.testing.assert_allclose(a, [[0, 0], [0.5, 0], [1, 0]])
    np.testing.assert_allclose(b, [[1.5, 0]])
    np.testing.assert_allclose(normalize(train, lo=-1, hi=1)[:, 0], [-1, 0, 1])


@settings(max_examples=50)
@given(arrays(float, (6, 3), elements=st.floats(-1e6, 1e6)))
def test_normalize_idempotent(X):
    once = normalize(X)
    np.testing.assert_allclose(normalize(once), once, atol=1e-9)
    assert np.all((once >= 0) & (once <= 1))


def test_one_hot_and_split():
    np.testing.assert_array_equal(one_hot(2, 3), [0, 0, 1])
    np.testing.assert_array_equal(one_hot([0, 1], 2), [[1, 0], [0, 1]])
    tr, te = split(10, 0.7, 4)
    assert len(tr) == 7 and len(te) == 3 and set(tr) | set(te) == set(range(10))
    tr2, _ = split(10, 0.7, 4)
    np.testing.assert_array_equal(tr, tr2)
    with pytest.raises(ValueError):
        split(10, 1.0, 0)


def test_load_csv(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,y\n1,2,3\n4,5,6\n")
    header, X, Y = load_csv(p)
    assert header == ["a", "b", "y"]
    np.testing.assert_array_equal(X, [[1, 2], [4, 5]])
    np.testing.assert_array_equal(Y, [[3], [6]])
    bad = tmp_path / "bad.csv"
    bad.write_text("a,y\n1,x\n")
    with pytest.raises(ValueError, match="non-numeric"):
        load_csv(bad)
    ragged = tmp_path / "r.csv"
    ragged.write_text("a,y\n1,2\n3\n")
    with pytest.raises(ValueError):
        load_csv(ragged)
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "missing.csv")


def test_blobs():
    X, y = gaussian_blobs(2000, 0)
    assert set(np.unique(y)) == {0, 1}
    assert X[y == 1, 0].mean() - X[y == 0, 0].mean() == pytest.approx(2.0, abs=0.15)


def test_fold_ids():
    ids = fold_ids(103, 10, 0)
    counts = np.bincount(ids)
    assert counts.max() - counts.min() <= 1
    strata = np.array([0] * 50 + [1] * 30)
    ids = fold_ids(80, 5, 0, strata)
    for k in range(5):
        assert np.sum((ids == k) & (strata == 0)) == 10
        assert np.sum((ids == k) & (strata == 1)) == 6


def scale_trainer(params, Xtr, ytr, Xva, seed):
    return np.full(Xva.shape[0], params["s"] * ytr.mean())


def test_grid_search_planted_optimum():
    rng = np.random.default_rng(0)
    X = np.zeros((200, 1))
    y = 4.0 + 0.5 * rng.standard_normal(200)
    spec = GridSearchSpec({"s": [0.25, 0.5, 1.0, 1.5, 2.0]}, folds=10)
    res = grid_search(spec, scale_trainer, X, y)
    assert res.best == {"s": 1.0}
    assert min(row["score"] for row in res.table) == res.best_score
    for row in res.table:
        assert len(row["fold_scores"]) == 10
        assert row["score"] == pytest.approx(np.mean(row["fold_scores"]))


def test_grid_search_width_planted():
    # targets come from an RBF expansion of one width; that width gives the lowest CV error
    from eln.lip import RbfMap
    from eln.solver import ridge_fit

    rng = np.random.default_rng(1)
    anchors = rng.uniform(-3, 3, (15, 1))
    X = rng.uniform(-3, 3, (300, 1))
    y = RbfMap(anchors, 0.5).transform(X) @ rng.standard_normal(15) + 0.01 * rng.standard_normal(300)

    def trainer(params, Xtr, ytr, Xva, seed):
        fm = RbfMap(anchors, params["sigma"])
        return fm.transform(Xva) @ ridge_fit(fm.transform(Xtr), ytr, 1e-6)

    res = grid_search(GridSearchSpec({"sigma": [0.1, 0.3, 0.5, 1.0, 3.0]}, folds=5), trainer, X, y)
    assert res.best == {"sigma": 0.5}


def test_grid_search_ties_and_counts():
    calls = []

    def trainer(params, Xtr, ytr, Xva, seed):
        calls.append((params["a"], seed))
        return np.zeros(Xva.shape[0])

    X, y = np.zeros((20, 1)), np.ones(20)
    res = grid_search(GridSearchSpec({"a": [3, 1, 2]}, folds=4), trainer, X, y)
    assert res.best == {"a": 3}
    assert [c[0] for c in calls] == [3] * 4 + [1] * 4 + [2] * 4
    assert len({c[1] for c in calls}) == 12
    single = grid_search(GridSearchSpec({"a": [7]}, folds=2), trainer, X, y)
    assert single.best == {"a": 7}


def test_grid_search_error_rate():
    X, labels = gaussian_blobs(200, 3, separation=4.0)

    def trainer(params, Xtr, ytr, Xva, seed):
        t = params["t"]
        return np.column_stack([Xva[:, 0] < t, Xva[:, 0] >= t]).astype(float)

    spec = GridSearchSpec({"t": [-3.0, 0.0, 3.0]}, folds=5, stratified=True, objective="error_rate")
    res = grid_search(spec, trainer, X, one_hot(labels, 2), labels)
    assert res.best == {"t": 0.0}
    with pytest.raises(ValueError):
        grid_search(spec, trainer, X, one_hot(labels, 2))


def test_grid_search_pooled_and_table(tmp_path):
    rng = np.random.default_rng(2)
    sets = [(np.zeros((50, 1)), 2.0 + rng.standard_normal(50), None) for _ in range(3)]
    spec = GridSearchSpec({"s": [0.5, 1.0]}, folds=5)
    res = grid_search_pooled(spec, scale_trainer, sets)
    assert res.best == {"s": 1.0}
    assert all(len(r["fold_scores"]) == 15 for r in res.table)
    out = tmp_path / "cv.csv"
    write_cv_table(res, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "s,score,folds" and len(lines) == 3


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSearchSpec({"a": []})
    with pytest.raises(ValueError):
        GridSearchSpec({"a": [1]}, folds=1)


def test_default_grids_cover_methods():
    grids = load_grid_config()
    assert set(grids) == set(METHODS)
    for method, grid in grids.items():
        assert len(grid["gamma"]) == 11
        point = {k: v[0] for k, v in grid.items()}
        if method == "kmpe":
            point["sigma"] = 1
        assert valid_params(method, point)
    assert not valid_params("kmpe", {"sigma": 0.1, "p": 2, "gamma": 1})
    with pytest.raises(ValueError):
        method_config("nope", {})
