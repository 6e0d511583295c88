"""Tape and elementwise-op gradients, checked against central differences."""

import numpy as np
import pytest

from splatgen import nn
from splatgen.errors import GraphConsumed
from splatgen.nn import Tensor


def fd_grad(fn, x, h=1e-6):
    """Central-difference gradient of scalar fn at x, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = fn(x)
        flat[i] = orig - h
        fm = fn(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2 * h)
    return g


def check_unary(op, np_fn, lo=-2.0, hi=2.0, seed=0, rel=1e-5):
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, size=(3, 4))
    t = Tensor(x.copy(), requires_grad=True)
    out = op(t).sum()
    out.backward()
    got = t.grad
    want = fd_grad(lambda a: float(np_fn(a).sum()), x)
    scale = np.maximum(np.abs(want), 1e-3)
    assert np.abs(got - want).max() / scale.max() < rel


def test_exp_grad():
    check_unary(nn.exp, np.exp)


def test_log_grad():
    check_unary(nn.log, np.log, lo=0.1, hi=3.0)


def test_sqrt_grad():
    check_unary(nn.sqrt, np.sqrt, lo=0.1, hi=3.0)


def test_tanh_grad():
    check_unary(nn.tanh, np.tanh)


def test_sigmoid_grad():
    check_unary(nn.sigmoid, lambda a: 1 / (1 + np.exp(-a)))


def test_abs_grad():
    check_unary(nn.absolute, np.abs, lo=0.2, hi=2.0)  # stay off the kink


def test_gelu_matches_erf_form():
    from scipy.special import erf

    x = np.linspace(-3, 3, 13)
    got = nn.gelu(Tensor(x)).data
    want = 0.5 * x * (1 + erf(x / np.sqrt(2)))
    assert np.allclose(got, want, atol=1e-12)
    check_unary(nn.gelu, lambda a: 0.5 * a * (1 + erf(a / np.sqrt(2))))


def test_softmax_rows_sum_to_one_and_grad():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(4, 5))
    t = Tensor(x.copy(), requires_grad=True)
    s = nn.softmax(t)
    assert np.allclose(s.data.sum(axis=-1), 1.0)
    w = rng.normal(size=(4, 5))
    (s * Tensor(w)).sum().backward()

    def loss(a):
        e = np.exp(a - a.max(axis=-1, keepdims=True))
        p = e / e.sum(axis=-1, keepdims=True)
        return float((p * w).sum())

    want = fd_grad(loss, x)
    assert np.abs(t.grad - want).max() < 1e-6


def test_matmul_grads():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 2))
    ta = Tensor(a.copy(), requires_grad=True)
    tb = Tensor(b.copy(), requires_grad=True)
    (ta @ tb).sum().backward()
    ones = np.ones((3, 2))
    assert np.allclose(ta.grad, ones @ b.T)
    assert np.allclose(tb.grad, a.T @ ones)


def test_broadcast_add_unbroadcasts_grad():
    a = Tensor(np.zeros((3, 4)), requires_grad=True)
    b = Tensor(np.zeros((1, 4)), requires_grad=True)
    (a + b).sum().backward()
    assert a.grad.shape == (3, 4)
    assert b.grad.shape == (1, 4)
    assert np.all(b.grad == 3.0)


def test_mean_matches_numpy_bitwise():
    rng = np.random.default_rng(3)
    for shape in [(7,), (5, 3), (2, 3, 4)]:
        x = rng.normal(size=shape)
        assert nn.tmean(Tensor(x)).data == np.mean(x)
        got = nn.tmean(Tensor(x), axis=-1).data
        assert np.array_equal(got, np.mean(x, axis=-1))


def test_index_gather_and_scatter_add_grads():
    x = Tensor(np.arange(5.0), requires_grad=True)
    idx = np.array([0, 2, 2, 4])
    g = nn.index_gather(x, idx)
    assert np.array_equal(g.data, [0.0, 2.0, 2.0, 4.0])
    g.sum().backward()
    assert np.array_equal(x.grad, [1.0, 0.0, 2.0, 0.0, 1.0])

    v = Tensor(np.ones(4), requires_grad=True)
    s = nn.scatter_add(v, idx, 5)
    assert np.array_equal(s.data, [1.0, 0.0, 2.0, 0.0, 1.0])
    (s * Tensor(np.arange(5.0))).sum().backward()
    assert np.array_equal(v.grad, [0.0, 2.0, 2.0, 4.0])


def test_concat_splits_grad():
    a = Tensor(np.ones((2, 2)), requires_grad=True)
    b = Tensor(np.ones((3, 2)), requires_grad=True)
    out = nn.concat([a, b], axis=0)
    (out * Tensor(np.arange(10.0).reshape(5, 2))).sum().backward()
    assert np.array_equal(a.grad, [[0, 1], [2, 3]])
    assert np.array_equal(b.grad, [[4, 5], [6, 7], [8, 9]])


def test_clip_blocks_gradient_outside():
    x = Tensor(np.array([-2.0, 0.0, 2.0]), requires_grad=True)
    nn.clip(x, -1.0, 1.0).sum().backward()
    assert np.array_equal(x.grad, [0.0, 1.0, 0.0])


def test_detach_stops_gradient():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    y = (x.detach() * x).sum()
    y.backward()
    assert np.array_equal(x.grad, x.data)  # only the non-detached factor


def test_second_backward_raises():
    x = Tensor(np.ones(3), requires_grad=True)
    y = (x * x).sum()
    y.backward()
    with pytest.raises(GraphConsumed):
        y.backward()


def test_transpose_reshape_grads():
    x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    y = x.transpose((1, 0)).reshape(6)
    (y * Tensor(np.arange(6.0))).sum().backward()
    want = np.arange(6.0).reshape(3, 2).T
    assert np.array_equal(x.grad, want)
