import math

import numpy as np
import pytest

from racapnet import tensor as T
from racapnet.attention import AttentionParams, multi_head, relation_query
from racapnet.tensor import DimensionError

from oracles import check_grads


def params_from(arrays, n_heads, energy_scale="d"):
    names = ("W_q", "W_k", "W_v", "W_o", "W_f1", "b_f1", "W_f2", "b_f2")
    return AttentionParams(*(T.parameter(arrays[k]) for k in names), n_heads, energy_scale)


def random_params(rng, d=4, d_out=6, n=2, energy_scale="d"):
    return AttentionParams.init(d, d_out, n, rng, energy_scale)


def test_relation_query_hand_values():
    H = T.Tensor([[1.0, 0.0], [0.0, 1.0]])
    q = relation_query(H, 0, 1, T.Tensor([[2.0, 0.0], [0.0, 3.0]]))
    np.testing.assert_array_equal(q.data, [2.0, -3.0])


def test_relation_query_identity_and_equal_states(rng):
    H = T.Tensor(rng.normal(size=(4, 3)))
    q = relation_query(H, 2, 0, T.Tensor(np.eye(3)))
    np.testing.assert_array_equal(q.data, H.data[2] - H.data[0])
    same = T.Tensor(np.tile(rng.normal(size=3), (4, 1)))
    np.testing.assert_array_equal(relation_query(same, 1, 3, T.Tensor(rng.normal(size=(3, 3)))).data, 0.0)


def test_relation_query_rejects_same_entity(rng):
    with pytest.raises(ValueError):
        relation_query(T.Tensor(rng.normal(size=(3, 2))), 1, 1, T.Tensor(np.eye(2)))


def test_single_token_weight_is_one(rng):
    p = random_params(rng)
    out = multi_head(T.Tensor(rng.normal(size=(1, 4))), T.Tensor(rng.normal(size=4)), p)
    np.testing.assert_array_equal(out.weights, np.ones((2, 1)))


def test_identical_rows_give_value_slice(rng):
    p = random_params(rng)
    row = rng.normal(size=4)
    H = T.Tensor(np.tile(row, (5, 1)))
    out = multi_head(H, T.Tensor(rng.normal(size=4)), p)
    value = row @ p.W_v.data
    np.testing.assert_allclose(out.heads.data.reshape(-1), value, rtol=1e-13)


def test_two_token_pipeline_against_scalar_trace():
    a = {
        "W_q": np.array([[0.5, -1.0], [0.3, 0.8]]),
        "W_k": np.array([[1.0, 0.2], [-0.4, 0.6]]),
        "W_v": np.array([[0.7, -0.3], [0.1, 0.9]]),
        "W_o": np.array([[1.1, 0.0], [0.2, -0.5]]),
        "W_f1": np.array([[0.6, -0.8], [0.4, 0.3]]),
        "b_f1": np.array([0.05, -0.1]),
        "W_f2": np.array([[1.0, -0.2, 0.3], [0.5, 0.4, -0.6]]),
        "b_f2": np.array([0.0, 0.1, -0.2]),
    }
    h = [[0.9, -0.2], [0.1, 0.4]]
    out = multi_head(T.Tensor(h), relation_query(T.Tensor(h), 0, 1, T.Tensor(a["W_q"])), params_from(a, 1))

    def vecmat(v, M):
        return [sum(v[i] * M[i][j] for i in range(len(v))) for j in range(len(M[0]))]

    q = vecmat([h[0][0] - h[1][0], h[0][1] - h[1][1]], a["W_q"])
    keys = [vecmat(row, a["W_k"]) for row in h]
    vals = [vecmat(row, a["W_v"]) for row in h]
    energy = [sum(q[i] * k[i] for i in range(2)) / math.sqrt(2) for k in keys]
    z = [math.exp(e) for e in energy]
    w = [zi / sum(z) for zi in z]
    head = [w[0] * vals[0][j] + w[1] * vals[1][j] for j in range(2)]
    em = vecmat(head, a["W_o"])
    hidden = [max(0.0, x + b) for x, b in zip(vecmat(em, a["W_f1"]), a["b_f1"])]
    hr = [x + b for x, b in zip(vecmat(hidden, a["W_f2"]), a["b_f2"])]

    np.testing.assert_allclose(out.weights[0], w, rtol=1e-14)
    np.testing.assert_allclose(out.heads.data[0], head, rtol=1e-14)
    np.testing.assert_allclose(out.H_r.data, hr, rtol=1e-13, atol=1e-15)


def test_energy_scale_d_head(rng):
    p_d = random_params(rng, d=4, n=2)
    p_dh = AttentionParams(p_d.W_q, p_d.W_k, p_d.W_v, p_d.W_o, p_d.W_f1, p_d.b_f1, p_d.W_f2, p_d.b_f2, 2, "d_h")
    H, q = T.Tensor(rng.normal(size=(3, 4))), T.Tensor(rng.normal(size=4))
    K = (H.data @ p_d.W_k.data).reshape(3, 2, 2)
    e0 = K[:, 0] @ q.data[:2]
    expect_d = np.exp(e0 / 2.0) / np.exp(e0 / 2.0).sum()
    expect_dh = np.exp(e0 / np.sqrt(2)) / np.exp(e0 / np.sqrt(2)).sum()
    np.testing.assert_allclose(multi_head(H, q, p_d).weights[0], expect_d, rtol=1e-13)
    np.testing.assert_allclose(multi_head(H, q, p_dh).weights[0], expect_dh, rtol=1e-13)


def test_weights_are_simplex_and_output_width(rng):
    for _ in range(50):
        l = int(rng.integers(1, 9))
        p = random_params(rng, d=6, d_out=9, n=3)
        out = multi_head(T.Tensor(rng.normal(size=(l, 6)) * 3), T.Tensor(rng.normal(size=6) * 3), p)
        assert np.all(out.weights >= 0)
        np.testing.assert_allclose(out.weights.sum(axis=1), 1.0, atol=1e-9)
        assert out.H_r.shape == (9,)
        assert out.heads.shape == (3, 2)


def test_token_permutation_permutes_weights(rng):
    p = random_params(rng)
    H = rng.normal(size=(5, 4))
    q = T.Tensor(rng.normal(size=4))
    perm = rng.permutation(5)
    base = multi_head(T.Tensor(H), q, p)
    permuted = multi_head(T.Tensor(H[perm]), q, p)
    np.testing.assert_allclose(permuted.weights, base.weights[:, perm], rtol=1e-12)
    np.testing.assert_allclose(permuted.heads.data, base.heads.data, rtol=1e-12)


def test_shape_mismatch(rng):
    with pytest.raises(DimensionError):
        multi_head(T.Tensor(rng.normal(size=(3, 5))), T.Tensor(rng.normal(size=4)), random_params(rng))


def test_heads_must_divide_d(rng):
    with pytest.raises(ValueError):
        AttentionParams.init(6, 4, 4, rng)


def test_end_to_end_gradient(rng):
    p = random_params(rng, d=4, d_out=4, n=2)
    H = T.parameter(rng.normal(size=(3, 4)))
    w = T.Tensor(rng.normal(size=4))
    tracked = [H, p.W_q, p.W_k, p.W_v, p.W_o, p.W_f1, p.b_f1, p.W_f2, p.b_f2]
    p.b_f1.data[:] = 0.3  # keep the relu away from its kink

    def loss():
        q = relation_query(H, 0, 2, p.W_q)
        return T.tsum(multi_head(H, q, p).H_r * w)

    assert check_grads(loss, tracked) < 1e-4
