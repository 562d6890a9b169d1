import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from eln.lip import Linear, RbfMap, Rvflnn, build_design_matrix, feature_map_from_dict, map_row, rvflnn_init


def test_linear_map():
    np.testing.assert_array_equal(map_row(Linear(2), [2.0, 1.0]), [2.0, 1.0])
    np.testing.assert_array_equal(build_design_matrix(Linear(3), np.eye(3)), np.eye(3))


def test_rvflnn_init_is_seeded_and_bounded():
    a, b = rvflnn_init(4, 50, seed=3), rvflnn_init(4, 50, seed=3)
    np.testing.assert_array_equal(a.W, b.W)
    np.testing.assert_array_equal(a.b, b.b)
    big = rvflnn_init(10, 1000, seed=1)
    assert big.W.shape == (1000, 10)
    assert np.all((big.W >= -1) & (big.W <= 1))
    assert np.all((big.b >= 0) & (big.b <= 1))
    assert big.output_dim() == 1010


def test_rvflnn_with_empty_hidden_layer_is_linear():
    fm = rvflnn_init(3, 0, seed=0)
    x = np.array([0.5, -1.0, 2.0])
    np.testing.assert_array_equal(map_row(fm, x), x)


def test_rvflnn_zero_weights_give_half():
    fm = Rvflnn(np.zeros((5, 2)), np.zeros(5))
    np.testing.assert_array_equal(map_row(fm, [3.0, -4.0]), [3.0, -4.0, 0.5, 0.5, 0.5, 0.5, 0.5])


def test_rbf_map():
    anchors = np.random.default_rng(0).standard_normal((6, 3))
    fm = RbfMap(anchors, 0.8)
    assert map_row(fm, anchors[2])[2] == pytest.approx(1.0)
    H = build_design_matrix(fm, anchors)
    np.testing.assert_allclose(np.diag(H), 1.0)
    x = np.array([0.1, 0.2, 0.3])
    ref = np.exp(-np.sum((x - anchors) ** 2, axis=1) / (2 * 0.8**2))
    np.testing.assert_allclose(map_row(fm, x), ref, rtol=1e-12)
    with pytest.raises(ValueError):
        RbfMap(anchors, 0.0)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        map_row(Linear(2), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        build_design_matrix(rvflnn_init(3, 4), np.ones((2, 2)))


def test_design_matrix_rows_follow_inputs():
    fm = rvflnn_init(2, 7, seed=5)
    X = np.random.default_rng(1).standard_normal((4, 2))
    H = build_design_matrix(fm, X)
    for i in range(4):
        np.testing.assert_allclose(H[i], map_row(fm, X[i]), rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(build_design_matrix(fm, X[::-1]), H[::-1], rtol=1e-14, atol=1e-15)


@settings(max_examples=50)
@given(arrays(float, (5, 3), elements=st.floats(-1e3, 1e3)))
def test_sigmoid_outputs_strictly_inside_unit_interval(X):
    fm = rvflnn_init(3, 20, seed=2)
    hidden = build_design_matrix(fm, X / 100.0)[:, 3:]
    assert np.all((hidden > 0) & (hidden < 1))
    np.testing.assert_array_equal(build_design_matrix(fm, X / 100.0), build_design_matrix(fm, X / 100.0))


def test_feature_map_serialization():
    X = np.random.default_rng(2).standard_normal((3, 2))
    for fm in (Linear(2), rvflnn_init(2, 5, seed=1), rvflnn_init(2, 0), RbfMap(X, 1.5)):
        back = feature_map_from_dict(fm.to_dict())
        np.testing.assert_array_equal(build_design_matrix(back, X), build_design_matrix(fm, X))
