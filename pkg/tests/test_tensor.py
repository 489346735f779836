import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from emgkin import tensor
from emgkin.errors import DimensionError


def test_default_dtype_is_float32():
    assert tensor.default_dtype() == np.float32


def test_precision_context_switches_and_restores():
    assert tensor.tensor([1.0]).dtype == np.float32
    with tensor.precision("f64"):
        assert tensor.tensor([1.0]).dtype == np.float64
        assert tensor.zeros((2, 2)).dtype == np.float64
    assert tensor.tensor([1.0]).dtype == np.float32


def test_precision_restores_after_exception():
    with pytest.raises(RuntimeError):
        with tensor.precision("f64"):
            raise RuntimeError("boom")
    assert tensor.default_dtype() == np.float32


def test_unknown_precision_mode_rejected():
    with pytest.raises(ValueError):
        tensor.set_precision("f16")


def test_matmul_checks_inner_dim():
    a = np.ones((2, 3))
    b = np.ones((4, 2))
    with pytest.raises(DimensionError):
        tensor.matmul(a, b)
    out = tensor.matmul(a, np.ones((3, 4)))
    assert out.shape == (2, 4)


def test_matmul_rejects_vectors():
    with pytest.raises(DimensionError):
        tensor.matmul(np.ones(3), np.ones((3, 2)))


@pytest.mark.parametrize("op", [tensor.add, tensor.sub, tensor.mul])
def test_elementwise_ops_require_same_shape(op):
    with pytest.raises(DimensionError):
        op(np.ones((2, 3)), np.ones((3, 2)))


def test_mul_is_hadamard():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([[2.0, 0.5], [1.0, 2.0]])
    np.testing.assert_allclose(tensor.mul(a, b), a * b)


def test_sigmoid_extreme_inputs_do_not_overflow():
    x = np.array([-1e4, -50.0, 0.0, 50.0, 1e4])
    with np.errstate(over="raise"):
        y = tensor.sigmoid(x)
    assert np.all(np.isfinite(y))
    np.testing.assert_allclose(y[2], 0.5)
    assert y[0] == 0.0 and y[-1] == 1.0


@given(st.lists(st.floats(-30, 30), min_size=1, max_size=50))
def test_sigmoid_matches_reference(values):
    x = np.array(values)
    np.testing.assert_allclose(tensor.sigmoid(x), 1.0 / (1.0 + np.exp(-x)), rtol=1e-12)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=50))
def test_sigmoid_bounded_and_monotone(values):
    x = np.sort(np.array(values))
    y = tensor.sigmoid(x)
    assert np.all((y >= 0.0) & (y <= 1.0))
    assert np.all(np.diff(y) >= 0.0)


def test_reshape_validates_count():
    with pytest.raises(DimensionError):
        tensor.reshape(np.arange(6), (4, 2))
    assert tensor.reshape(np.arange(6), (2, 3)).shape == (2, 3)


def test_concat_mismatched_shapes_rejected():
    with pytest.raises(DimensionError):
        tensor.concat([np.ones((2, 3)), np.ones((2, 4))], axis=0)
    out = tensor.concat([np.ones((2, 3)), np.ones((2, 4))], axis=1)
    assert out.shape == (2, 7)


def test_concat_empty_rejected():
    with pytest.raises(DimensionError):
        tensor.concat([])
