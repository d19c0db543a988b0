"""Forward semantics of the tensor primitives against independent oracles."""

import numpy as np
import pytest

from tvpr import tensor as T
from tvpr.errors import ConfigError, NonFiniteError, ShapeError
from tvpr.tensor import Tensor


# ---------------------------------------------------------------------------
# independent oracles (plain numpy, written without reference to tensor.py)
# ---------------------------------------------------------------------------

def oracle_conv2d(x, w, stride):
    """Nested-loop 2-d convolution with zero same-padding, ceil-mode stride."""
    sh, sw = stride
    n, c, h, wd = x.shape
    cout, _, kh, kw = w.shape
    hp, wp = -(-h // sh), -(-wd // sw)
    ph, pw = kh // 2, kw // 2
    out = np.zeros((n, cout, hp, wp), dtype=np.float64)
    for b in range(n):
        for o in range(cout):
            for i in range(hp):
                for j in range(wp):
                    acc = 0.0
                    for ci in range(c):
                        for di in range(kh):
                            for dj in range(kw):
                                y, xx = i * sh + di - ph, j * sw + dj - pw
                                if 0 <= y < h and 0 <= xx < wd:
                                    acc += x[b, ci, y, xx] * w[o, ci, di, dj]
                    out[b, o, i, j] = acc
    return out


def oracle_conv3d(x, w, stride):
    """Nested-loop dense 3-d convolution over (B, T, C, H, W)."""
    st, sh, sw = stride
    b, t, c, h, wd = x.shape
    cout, _, kt, kh, kw = w.shape
    tp, hp, wp = -(-t // st), -(-h // sh), -(-wd // sw)
    pt, ph, pw = kt // 2, kh // 2, kw // 2
    out = np.zeros((b, tp, cout, hp, wp), dtype=np.float64)
    for bi in range(b):
        for o in range(cout):
            for k in range(tp):
                for i in range(hp):
                    for j in range(wp):
                        acc = 0.0
                        for ci in range(c):
                            for dt in range(kt):
                                for di in range(kh):
                                    for dj in range(kw):
                                        tt = k * st + dt - pt
                                        y = i * sh + di - ph
                                        xx = j * sw + dj - pw
                                        if 0 <= tt < t and 0 <= y < h and 0 <= xx < wd:
                                            acc += x[bi, tt, ci, y, xx] * w[o, ci, dt, di, dj]
                        out[bi, k, o, i, j] = acc
    return out


# ---------------------------------------------------------------------------
# arithmetic and broadcasting
# ---------------------------------------------------------------------------

def test_add_broadcasts_and_matches_numpy(rng):
    a = rng.normal(size=(3, 1, 4))
    b = rng.normal(size=(5, 4))
    out = Tensor(a) + Tensor(b)
    np.testing.assert_allclose(out.data, (a + b).astype(np.float32), rtol=1e-6)
    assert out.shape == (3, 5, 4)


def test_scalar_operand_promotes():
    out = 2.0 * Tensor([1.0, 2.0]) - 1.0
    np.testing.assert_allclose(out.data, [1.0, 3.0])


def test_div_matches_numpy(rng):
    a = rng.normal(size=(4,)) + 3.0
    b = rng.normal(size=(4,)) + 3.0
    out = Tensor(a) / Tensor(b)
    np.testing.assert_allclose(out.data, (a / b).astype(np.float32), rtol=1e-6)


def test_nonfinite_forward_raises():
    with np.errstate(divide="ignore"), pytest.raises(NonFiniteError):
        T.log(Tensor([0.0]))


def test_finite_checks_toggle():
    T.set_finite_checks(False)
    try:
        with np.errstate(divide="ignore"):
            out = T.log(Tensor([0.0]))
        assert np.isneginf(out.data[0])
    finally:
        T.set_finite_checks(True)


# ---------------------------------------------------------------------------
# matmul
# ---------------------------------------------------------------------------

def test_matmul_matches_numpy_batched(rng):
    a = rng.normal(size=(2, 3, 4, 5))
    b = rng.normal(size=(3, 5, 6))
    out = T.matmul(Tensor(a), Tensor(b))
    np.testing.assert_allclose(out.data, np.matmul(a, b).astype(np.float32), rtol=1e-5)


def test_matmul_rejects_inner_mismatch():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(4, 2\)"):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


def test_matmul_rejects_vectors():
    with pytest.raises(ShapeError):
        T.matmul(Tensor(np.ones(3)), Tensor(np.ones((3, 2))))


# ---------------------------------------------------------------------------
# softmax / layer norm / gelu
# ---------------------------------------------------------------------------

def test_softmax_rows_sum_to_one(rng):
    x = rng.normal(size=(4, 7)) * 50.0  # large values: stability matters
    s = T.softmax(Tensor(x), axis=-1)
    np.testing.assert_allclose(s.data.sum(axis=-1), np.ones(4), rtol=1e-6)
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    np.testing.assert_allclose(s.data, e / e.sum(axis=-1, keepdims=True),
                               rtol=1e-12, atol=1e-300)


def test_softmax_known_values():
    s = T.softmax(Tensor([[0.0, np.log(3.0)]], dtype=np.float64), axis=-1)
    np.testing.assert_allclose(s.data, [[0.25, 0.75]], rtol=1e-12)


def test_softmax_empty_axis_rejected():
    with pytest.raises(ShapeError):
        T.softmax(Tensor(np.ones((2, 0))), axis=-1)


def test_layer_norm_normalizes_last_axis(rng):
    x = rng.normal(size=(3, 5, 8)) * 4.0 + 2.0
    g = np.ones(8)
    b = np.zeros(8)
    out = T.layer_norm(Tensor(x, dtype=np.float64), Tensor(g, dtype=np.float64),
                       Tensor(b, dtype=np.float64))
    np.testing.assert_allclose(out.data.mean(axis=-1), np.zeros((3, 5)), atol=1e-12)
    np.testing.assert_allclose(out.data.std(axis=-1), np.ones((3, 5)), rtol=1e-4)


def test_layer_norm_affine_applied():
    x = np.array([[1.0, 3.0]])
    out = T.layer_norm(Tensor(x, dtype=np.float64), Tensor([2.0, 2.0], dtype=np.float64),
                       Tensor([5.0, 5.0], dtype=np.float64), eps=0.0)
    np.testing.assert_allclose(out.data, [[3.0, 7.0]], rtol=1e-12)


def test_layer_norm_constant_row_stays_finite():
    x = np.full((2, 4), 3.0)
    out = T.layer_norm(Tensor(x), Tensor(np.ones(4)), Tensor(np.zeros(4)))
    np.testing.assert_allclose(out.data, np.zeros((2, 4)), atol=1e-6)


def test_layer_norm_rejects_bad_gain_shape():
    with pytest.raises(ShapeError):
        T.layer_norm(Tensor(np.ones((2, 4))), Tensor(np.ones(3)), Tensor(np.zeros(4)))


def test_gelu_known_values():
    # hand-computed from the tanh form at x = 1:
    # inner = sqrt(2/pi) * 1.044715, 0.5 * (1 + tanh(inner)) = 0.841192
    out = T.gelu(Tensor([0.0, 1.0], dtype=np.float64))
    np.testing.assert_allclose(out.data, [0.0, 0.8411919906082768], rtol=1e-12)


# ---------------------------------------------------------------------------
# reductions, indexing, shaping
# ---------------------------------------------------------------------------

def test_sum_mean_axis_tuple(rng):
    x = rng.normal(size=(2, 3, 4))
    assert np.allclose(T.sum_(Tensor(x), axis=(0, 2)).data, x.sum(axis=(0, 2)), rtol=1e-5)
    assert np.allclose(T.mean(Tensor(x), axis=1, keepdims=True).data,
                       x.mean(axis=1, keepdims=True), rtol=1e-5)


def test_max_pool_values_and_first_tie(rng):
    x = np.array([[1.0, 5.0, 5.0, 2.0]])
    out = T.max_pool_over_axis(Tensor(x, requires_grad=True), axis=1)
    assert out.data[0] == 5.0
    out.backward(np.array([1.0]))
    # gradient must land entirely on the first of the tied maxima

    np.testing.assert_array_equal(out._node.parents[0].grad, [[0.0, 1.0, 0.0, 0.0]])


def test_max_pool_empty_axis_rejected():
    with pytest.raises(ShapeError):
        T.max_pool_over_axis(Tensor(np.ones((2, 0))), axis=1)


def test_take_and_concat_roundtrip(rng):
    x = rng.normal(size=(4, 3)).astype(np.float32)
    t = Tensor(x)
    parts = [t[0:2], t[2:4]]
    back = T.concat(parts, axis=0)
    np.testing.assert_array_equal(back.data, x)


def test_reshape_transpose(rng):
    x = rng.normal(size=(2, 3, 4)).astype(np.float32)
    out = T.transpose(Tensor(x), (1, 0, 2))
    np.testing.assert_array_equal(out.data, x.transpose(1, 0, 2))
    out2 = T.reshape(Tensor(x), (6, 4))
    np.testing.assert_array_equal(out2.data, x.reshape(6, 4))


def test_embedding_lookup_and_bounds(rng):
    table = rng.normal(size=(10, 4)).astype(np.float32)
    idx = np.array([[0, 3], [9, 3]])
    out = T.embedding_lookup(Tensor(table), idx)
    np.testing.assert_array_equal(out.data, table[idx])
    with pytest.raises(IndexError, match="10"):
        T.embedding_lookup(Tensor(table), np.array([10]))
    with pytest.raises(IndexError):
        T.embedding_lookup(Tensor(table), np.array([-1]))


# ---------------------------------------------------------------------------
# convolutions
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("stride", [(1, 1), (2, 2), (2, 3)])
def test_conv2d_matches_nested_loop_oracle(rng, stride):
    x = rng.normal(size=(2, 3, 7, 6))
    w = rng.normal(size=(4, 3, 3, 3))
    out = T.conv2d(Tensor(x, dtype=np.float64), Tensor(w, dtype=np.float64), stride)
    np.testing.assert_allclose(out.data, oracle_conv2d(x, w, stride), rtol=1e-10)


def test_conv2d_ceil_mode_output_shape():
    x = Tensor(np.zeros((1, 1, 7, 7)))
    w = Tensor(np.zeros((2, 1, 3, 3)))
    assert T.conv2d(x, w, (2, 2)).shape == (1, 2, 4, 4)  # ceil(7/2) = 4


def test_conv2d_rejects_even_kernel():
    with pytest.raises(ConfigError):
        T.conv2d(Tensor(np.zeros((1, 1, 4, 4))), Tensor(np.zeros((1, 1, 2, 2))), (1, 1))


def test_conv2d_rejects_channel_mismatch():
    with pytest.raises(ShapeError):
        T.conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))), (1, 1))


def test_conv1d_time_matches_dense(rng):
    x = rng.normal(size=(2, 6, 3, 2, 2))
    w = rng.normal(size=(4, 3, 3))
    out = T.conv1d_time(Tensor(x, dtype=np.float64), Tensor(w, dtype=np.float64), 2)
    # dense oracle: 3-d conv whose spatial factor is a 1x1 identity-like map
    dense = np.zeros((4, 3, 3, 1, 1))
    dense[:, :, :, 0, 0] = w
    np.testing.assert_allclose(out.data, oracle_conv3d(x, dense, (2, 1, 1)), rtol=1e-10)


@pytest.mark.parametrize("stride", [(1, 1, 1), (2, 2, 2), (3, 2, 2)])
def test_separable_conv3d_equals_dense_3d(rng, stride):
    """Factorized spatial+temporal conv == one dense 3-d conv of the outer-product kernel."""
    x = rng.normal(size=(1, 7, 2, 6, 5))
    ws = rng.normal(size=(3, 2, 3, 3))    # (Cmid, C, kh, kw)
    wt = rng.normal(size=(4, 3, 3))       # (Cout, Cmid, kt)
    out = T.separable_conv3d(Tensor(x, dtype=np.float64), Tensor(ws, dtype=np.float64),
                             Tensor(wt, dtype=np.float64), stride)
    dense = np.einsum("omt,mcij->octij", wt, ws)
    np.testing.assert_allclose(out.data, oracle_conv3d(x, dense, stride), rtol=1e-9)


def test_separable_conv3d_unbatched_squeezes(rng):
    x = rng.normal(size=(5, 2, 4, 4))
    ws = rng.normal(size=(3, 2, 3, 3))
    wt = rng.normal(size=(4, 3, 3))
    out = T.separable_conv3d(Tensor(x), Tensor(ws), Tensor(wt), (2, 2, 2))
    assert out.shape == (3, 4, 2, 2)  # (ceil(5/2), Cout, ceil(4/2), ceil(4/2))


# ---------------------------------------------------------------------------
# dropout
# ---------------------------------------------------------------------------

def test_dropout_scales_survivors(rng):
    x = np.ones((1000,), dtype=np.float32)
    out = T.dropout(Tensor(x), 0.25, np.random.default_rng(7))
    kept = out.data != 0.0
    np.testing.assert_allclose(out.data[kept], 1.0 / 0.75, rtol=1e-6)
    assert 0.6 < kept.mean() < 0.9


def test_dropout_zero_rate_is_identity(rng):
    x = rng.normal(size=(5,)).astype(np.float32)
    out = T.dropout(Tensor(x), 0.0, np.random.default_rng(0))
    np.testing.assert_array_equal(out.data, x)


def test_dropout_rejects_bad_rate():
    with pytest.raises(ConfigError):
        T.dropout(Tensor(np.ones(3)), 1.0, np.random.default_rng(0))
