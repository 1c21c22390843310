import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from racapnet import tensor as T
from racapnet.tensor import DimensionError, Tensor

from oracles import central_difference, check_grads, rel_error


def test_matmul_identity():
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(T.matmul(Tensor(np.eye(2)), a).data, a.data)


def test_matmul_zero_annihilates(rng):
    out = T.matmul(Tensor(np.zeros((2, 3))), Tensor(rng.normal(size=(3, 4))))
    np.testing.assert_array_equal(out.data, np.zeros((2, 4)))


def test_matmul_gradient_of_sum(rng):
    a = T.parameter(np.eye(2))
    b = Tensor(rng.normal(size=(2, 2)))
    T.backward(T.tsum(a @ b))
    # d sum(ab) / da = 1 b^T
    np.testing.assert_allclose(a.grad, np.ones((2, 2)) @ b.data.T)
    numeric = central_difference(lambda: T.tsum(Tensor(a.data) @ b).item(), a.data)
    assert rel_error(a.grad, numeric) < 1e-8


def test_matmul_shape_error_names_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
        T.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))


def test_relu_sign_cases():
    np.testing.assert_array_equal(T.relu(Tensor([-1.0, 0.0, 2.0])).data, [0.0, 0.0, 2.0])


def test_relu_derivative_at_zero_is_zero():
    x = T.parameter([0.0, 1.0])
    T.backward(T.tsum(T.relu(x)))
    np.testing.assert_array_equal(x.grad, [0.0, 1.0])


def test_sigmoid_midpoint():
    assert T.sigmoid(Tensor(0.0)).item() == 0.5


def test_sigmoid_extremes_do_not_overflow():
    out = T.sigmoid(Tensor([-1000.0, 1000.0])).data
    np.testing.assert_array_equal(out, [0.0, 1.0])


def test_tanh_gradient_at_point_three():
    x = T.parameter(0.3)
    T.backward(T.tanh(x))
    numeric = (np.tanh(0.3 + 1e-6) - np.tanh(0.3 - 1e-6)) / 2e-6
    assert abs(x.grad - numeric) / abs(numeric) < 1e-8


def test_elementwise_incompatible_shapes():
    with pytest.raises(DimensionError):
        T.elementwise("add", Tensor(np.zeros(3)), Tensor(np.zeros(4)))


def test_elementwise_dispatch():
    a = Tensor([1.0, -2.0])
    np.testing.assert_array_equal(T.elementwise("scale", a, 3.0).data, [3.0, -6.0])
    np.testing.assert_array_equal(T.elementwise("mul", a, a).data, [1.0, 4.0])
    with pytest.raises(ValueError):
        T.elementwise("cosh", a)


def test_softmax_uniform():
    np.testing.assert_allclose(T.softmax(Tensor([0.0, 0.0, 0.0])).data, [1 / 3] * 3, rtol=0, atol=1e-15)


def test_softmax_stabilized():
    out = T.softmax(Tensor([1000.0, 0.0])).data
    assert np.all(np.isfinite(out))
    assert out[0] == pytest.approx(1.0) and out[1] == pytest.approx(0.0, abs=1e-300)


def test_softmax_known_values():
    # exp(i) / sum exp(j), evaluated by hand
    e = np.exp([1.0, 2.0, 3.0])
    expected = e / e.sum()
    np.testing.assert_allclose(expected, [0.09003057, 0.24472847, 0.66524096], atol=5e-9)
    np.testing.assert_allclose(T.softmax(Tensor([1.0, 2.0, 3.0])).data, expected, rtol=1e-15)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 6)),
              elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_softmax_sums_to_one(x):
    out = T.softmax(Tensor(x), axis=1).data
    assert np.all(out >= 0)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)


def test_l2_norm_values():
    assert T.l2_norm(Tensor([3.0, 4.0])).item() == 5.0
    assert T.l2_norm(Tensor(np.zeros(3))).item() == 0.0


def test_l2_norm_zero_vector_gradient_is_zero():
    x = T.parameter(np.zeros(3))
    T.backward(T.l2_norm(x))
    np.testing.assert_array_equal(x.grad, np.zeros(3))


def test_l2_norm_gradient(rng):
    for _ in range(20):
        x = rng.normal(size=5)
        if np.linalg.norm(x) <= 0.1:
            continue
        p = T.parameter(x)
        assert check_grads(lambda: T.l2_norm(p), [p]) < 1e-6


def test_backward_linear_and_quadratic():
    w = T.parameter([1.0, 2.0, 3.0])
    T.backward(T.tsum(w))
    np.testing.assert_array_equal(w.grad, [1.0, 1.0, 1.0])
    v = T.parameter([1.0, 2.0])
    T.backward(T.tsum(T.square(v)))
    np.testing.assert_array_equal(v.grad, [2.0, 4.0])


def test_backward_rejects_non_scalar():
    w = T.parameter([1.0, 2.0])
    with pytest.raises(ValueError, match="scalar"):
        T.backward(w * 2.0)


def test_backward_accumulates_and_is_deterministic(rng):
    W = T.parameter(rng.normal(size=(3, 3)))
    x = Tensor(rng.normal(size=(2, 3)))

    def loss():
        return T.tsum(T.tanh(x @ W) * T.sigmoid(x @ W))

    T.backward(loss())
    first = W.grad.copy()
    T.backward(loss())
    np.testing.assert_allclose(W.grad, 2 * first, rtol=1e-15)
    W.zero_grad()
    T.backward(loss())
    np.testing.assert_array_equal(W.grad, first)


def test_interior_nodes_get_gradients():
    w = T.parameter([1.0, -2.0])
    hidden = w * 3.0
    loss = T.tsum(T.square(hidden))
    T.backward(loss)
    np.testing.assert_allclose(hidden.grad, 2 * hidden.data)
    # a second pass recomputes interior gradients instead of stacking them
    T.backward(loss)
    np.testing.assert_allclose(hidden.grad, 2 * hidden.data)
    np.testing.assert_allclose(w.grad, 2 * 18 * np.array([1.0, -2.0]))


def test_graph_visits_each_node_once(rng):
    a = T.parameter(rng.normal(size=3))
    b = a * a  # shared parent reached twice
    c = T.tsum(b + b)
    graph = T.backward(c)
    assert len({id(n) for n in graph.nodes}) == len(graph.nodes)
    np.testing.assert_allclose(a.grad, 4 * a.data)


def test_long_chain_does_not_hit_recursion_limit():
    x = T.parameter(1.0)
    y = x
    for _ in range(5000):
        y = y * 1.0
    T.backward(y)
    assert x.grad == 1.0


def test_no_grad_skips_graph():
    w = T.parameter([1.0])
    with T.no_grad():
        out = w * 2.0
    assert not out.requires_grad


# every primitive against central differences on 100 random inputs

def _weights(rng, shape):
    return Tensor(rng.normal(size=shape))


PRIMITIVES = {
    "add": (lambda a, b: a + b, 2, None),
    "sub": (lambda a, b: a - b, 2, None),
    "mul": (lambda a, b: a * b, 2, None),
    "div": (lambda a, b: a / b, 2, "denominator"),
    "safe_div": (lambda a, b: T.safe_div(a, b), 2, "denominator"),
    "broadcast_add": (lambda a, b: a + b[0:1], 2, None),
    "matmul": (lambda a, b: a @ T.transpose(b), 2, None),
    "relu": (lambda a: T.relu(a), 1, "kink"),
    "tanh": (lambda a: T.tanh(a), 1, None),
    "sigmoid": (lambda a: T.sigmoid(a), 1, None),
    "exp": (lambda a: T.exp(a), 1, None),
    "sqrt": (lambda a: T.sqrt(a), 1, "positive"),
    "square": (lambda a: T.square(a), 1, None),
    "scale": (lambda a: T.scale(a, -1.7), 1, None),
    "softmax": (lambda a: T.softmax(a, axis=1), 1, None),
    "l2_norm": (lambda a: T.l2_norm(a, axis=1), 1, None),
    "sum": (lambda a: T.tsum(a, axis=0), 1, None),
    "reshape": (lambda a: a.reshape(4, 3).T, 1, None),
    "getitem": (lambda a: a[1:, ::2], 1, None),
    "take_rows": (lambda a: T.take_rows(a, [0, 2, 0]), 1, None),
    "concat": (lambda a, b: T.concat([a, b], axis=1), 2, None),
    "stack": (lambda a, b: T.stack([a, b], axis=0), 2, None),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_primitive_gradients_match_finite_differences(name):
    fn, arity, domain = PRIMITIVES[name]
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    worst = 0.0
    for _ in range(100):
        xs = [rng.normal(size=(3, 4)) for _ in range(arity)]
        if domain == "denominator":
            xs[1] = np.sign(xs[1]) * (0.5 + np.abs(xs[1]))
        elif domain == "positive":
            xs[0] = 0.1 + np.abs(xs[0])
        elif domain == "kink":
            xs[0] = np.sign(xs[0]) * (0.01 + np.abs(xs[0]))
        params = [T.parameter(x) for x in xs]
        out_shape = fn(*params).shape
        w = _weights(rng, out_shape)
        worst = max(worst, check_grads(lambda: T.tsum(fn(*params) * w), params))
    assert worst < 1e-6, f"{name}: relative error {worst:.2e}"
