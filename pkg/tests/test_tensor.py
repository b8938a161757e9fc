"""
Tests for the autodiff tensor core.
"""

import math

import numpy as np
import pytest

from src.utils.errors import ParameterError, ShapeError
from src.utils.grad_check import grad_check
from src.utils.rng import Rng
from src.utils.tensor import (Tensor, absolute, clip, concat, exp, float64_mode, layer_norm, log,
                              matmul, max_over, maximum, mean_over, no_grad, relu, reshape, sigmoid,
                              sign, softmax_t, sum_over, swapaxes, tanh)


def _triple_loop(a, b):
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n), dtype=np.float64)
    for i in range(m):
        for j in range(n):
            for t in range(k):
                out[i, j] += float(a[i, t]) * float(b[t, j])
    return out


def test_matmul_identity_and_row_sums():
    x = Tensor([[1.0, 2.0], [3.0, 4.0]])
    eye = Tensor(np.eye(2))
    np.testing.assert_array_equal(matmul(eye, x).data, x.data)
    np.testing.assert_array_equal(matmul(x, Tensor([[1.0], [1.0]])).data, [[3.0], [7.0]])


def test_matmul_matches_triple_loop(rng_array):
    a, b = rng_array(3, 4), rng_array(4, 2)
    result = matmul(Tensor(a), Tensor(b)).data
    np.testing.assert_allclose(result, _triple_loop(a, b), rtol=1e-5, atol=1e-6)


def test_matmul_shape_mismatch_names_both_shapes():
    with pytest.raises(ShapeError) as info:
        matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))
    assert "(2, 3)" in str(info.value) and "(4, 5)" in str(info.value)


def test_matmul_backward_rules(rng_array):
    a = Tensor(rng_array(3, 4), requires_grad=True)
    b = Tensor(rng_array(4, 2), requires_grad=True)
    g = rng_array(3, 2)
    matmul(a, b).backward(g)
    np.testing.assert_allclose(a.grad, g @ b.data.T, rtol=1e-5)
    np.testing.assert_allclose(b.grad, a.data.T @ g, rtol=1e-5)


def test_softmax_analytic_cases():
    np.testing.assert_allclose(softmax_t(Tensor([1.0, 1.0, 1.0]), 1.0).data, [1 / 3] * 3, atol=1e-7)
    np.testing.assert_allclose(softmax_t(Tensor([0.0, math.log(2.0)]), 1.0).data, [1 / 3, 2 / 3], atol=1e-7)


def test_softmax_high_temperature_matches_scalar_oracle():
    out = softmax_t(Tensor([3.0, 0.0, 0.0]), 30.0).data
    denom = math.exp(0.1) + 2.0
    np.testing.assert_allclose(out, [math.exp(0.1) / denom, 1 / denom, 1 / denom], rtol=1e-6)
    assert out.max() / out.min() == pytest.approx(math.exp(0.1), rel=1e-6)


def test_softmax_near_uniform_at_tau_30():
    rng = Rng(3)
    logits = rng.uniform(-3.0, 3.0, (50, 7))
    out = softmax_t(Tensor(logits), 30.0, axis=-1).data
    ratio = out.max(axis=-1) / out.min(axis=-1)
    assert np.all(ratio <= math.exp(6 / 30) + 1e-6)
    np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-6)
    assert np.all((out > 0) & (out < 1))


@pytest.mark.parametrize("tau", [0.0, -1.0])
def test_softmax_rejects_non_positive_temperature(tau):
    with pytest.raises(ParameterError):
        softmax_t(Tensor([1.0, 2.0]), tau)


def test_layer_norm_cases():
    ones, zeros = Tensor(np.ones(3)), Tensor(np.zeros(3))
    np.testing.assert_allclose(layer_norm(Tensor([[2.0, 2.0, 2.0]]), ones, zeros).data, 0.0, atol=1e-7)
    out = layer_norm(Tensor([1.0, 3.0]), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=1e-12).data
    np.testing.assert_allclose(out, [-1.0, 1.0], atol=1e-6)


def test_layer_norm_moments():
    with float64_mode():
        x = Tensor(Rng(5).normal((4, 32), dtype=np.float64))
        out = layer_norm(x, Tensor(np.ones(32)), Tensor(np.zeros(32))).data
    assert np.all(np.abs(out.mean(axis=-1)) < 1e-6)
    assert np.all(np.abs(out.var(axis=-1) - 1.0) < 1e-4)


def test_shared_node_gradients_accumulate():
    x = Tensor([3.0], requires_grad=True)
    (x * x + x).backward()
    np.testing.assert_allclose(x.grad, [7.0])


def test_broadcast_gradient_is_summed():
    x = Tensor(np.ones((4, 3)), requires_grad=True)
    b = Tensor(np.zeros(3), requires_grad=True)
    sum_over(x + b).backward()
    np.testing.assert_allclose(b.grad, [4.0, 4.0, 4.0])


def test_max_over_routes_ties_to_first_index():
    x = Tensor([[1.0, 5.0, 5.0], [2.0, 0.0, 2.0]], requires_grad=True)
    sum_over(max_over(x, axis=-1)).backward()
    np.testing.assert_array_equal(x.grad, [[0, 1, 0], [1, 0, 0]])


def test_soft_threshold_pieces():
    x = Tensor([-2.0, -0.1, 0.0, 0.1, 2.0], requires_grad=True)
    shrunk = sign(x) * maximum(absolute(x) - 0.5, 0.0)
    np.testing.assert_allclose(shrunk.data, [-1.5, 0.0, 0.0, 0.0, 1.5])
    sum_over(shrunk).backward()
    np.testing.assert_array_equal(x.grad, [1, 0, 0, 0, 1])
    assert not sign(x).requires_grad


def test_item_requires_single_element():
    assert Tensor([[2.5]]).item() == 2.5
    with pytest.raises(ShapeError):
        Tensor([1.0, 2.0]).item()


def test_no_grad_builds_no_graph():
    w = Tensor([1.0, 2.0], requires_grad=True)
    with no_grad():
        out = sigmoid(w * 2.0)
    assert not out.requires_grad


def test_float64_mode_sets_default_dtype():
    assert Tensor([1, 2]).dtype == np.float32
    with float64_mode():
        assert Tensor([1, 2]).dtype == np.float64
    assert Tensor([1, 2]).dtype == np.float32


def _checked(name, build, *shapes, positive=False):
    with float64_mode():
        rng = Rng(11)
        leaves = {}
        for i, shape in enumerate(shapes):
            data = rng.normal(shape, dtype=np.float64)
            if positive:
                data = np.abs(data) + 0.5
            leaves[f"x{i}"] = Tensor(data, requires_grad=True)
        readout = Tensor(rng.normal(build(*leaves.values()).shape, dtype=np.float64))
        return grad_check(lambda: sum_over(build(*leaves.values()) * readout), leaves, name=name)


GRAD_SHAPES = [(2, 3), (4, 1), (3, 5), (1, 6), (2, 3, 4)]

# name, builder, operand shapes from a base shape, strictly positive inputs
GRAD_OPS = [
    ("add", lambda a, b: a + b, lambda s: [s, s[-1:]], False),
    ("sub", lambda a, b: a - b, lambda s: [s, s], False),
    ("mul", lambda a, b: a * b, lambda s: [s[:-1] + (1,), s], False),
    ("div", lambda a, b: a / b, lambda s: [s, s], True),
    ("neg", lambda a: -a, lambda s: [s], False),
    ("matmul", lambda a, b: matmul(a, b), lambda s: [s, (s[-1], 3)], False),
    ("relu", lambda a: relu(a), lambda s: [s], False),
    ("sigmoid", lambda a: sigmoid(a), lambda s: [s], False),
    ("tanh", lambda a: tanh(a), lambda s: [s], False),
    ("exp", lambda a: exp(a), lambda s: [s], False),
    ("log", lambda a: log(a), lambda s: [s], True),
    ("clip", lambda a: clip(a, -0.5, 0.5), lambda s: [s], False),
    ("abs", lambda a: absolute(a), lambda s: [s], False),
    ("maximum", lambda a: maximum(a, 0.1), lambda s: [s], False),
    ("softmax", lambda a: softmax_t(a, 2.0, axis=-1), lambda s: [s], False),
    ("layer_norm", lambda a, g, b: layer_norm(a, g, b), lambda s: [s, s[-1:], s[-1:]], False),
    ("concat", lambda a, b: concat([a, b], axis=0), lambda s: [s, s], False),
    ("reshape", lambda a: reshape(a, (a.size,)), lambda s: [s], False),
    ("swapaxes", lambda a: swapaxes(a, 0, -1), lambda s: [s], False),
    ("sum", lambda a: sum_over(a, axis=-1), lambda s: [s], False),
    ("mean", lambda a: mean_over(a, axis=0), lambda s: [s], False),
    ("max", lambda a: max_over(a, axis=-1), lambda s: [s], False),
]


@pytest.mark.parametrize("shape", GRAD_SHAPES, ids=str)
@pytest.mark.parametrize("name,build,operands,positive", GRAD_OPS, ids=[op[0] for op in GRAD_OPS])
def test_operations_pass_grad_check(name, build, operands, positive, shape):
    report = _checked(name, build, *operands(shape), positive=positive)
    assert report.passed, report.summary()
    assert report.max_rel_error < 1e-4
