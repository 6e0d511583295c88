import numpy as np
import pytest
from scipy.signal import correlate

from splatgen.nn import Tensor, avg_pool2d, conv2d, conv3d


def ref_conv2d(x, w, b=None):
    """scipy cross-correlation reference, same zero padding."""
    c_out, c_in, kh, kw = w.shape
    _, h, wid = x.shape
    out = np.zeros((c_out, h, wid))
    for o in range(c_out):
        acc = np.zeros((h, wid))
        for i in range(c_in):
            acc += correlate(x[i], w[o, i], mode="same")
        out[o] = acc + (b[o] if b is not None else 0.0)
    return out


def test_conv2d_matches_scipy():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 8, 9))
    w = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)
    got = conv2d(Tensor(x), Tensor(w), Tensor(b)).data
    assert np.allclose(got, ref_conv2d(x, w, b), atol=1e-10)


def test_conv2d_identity_kernel():
    x = np.random.default_rng(1).normal(size=(2, 5, 5))
    w = np.zeros((2, 2, 3, 3))
    w[0, 0, 1, 1] = 1.0
    w[1, 1, 1, 1] = 1.0
    got = conv2d(Tensor(x), Tensor(w)).data
    assert np.allclose(got, x, atol=1e-12)


def test_conv2d_grads_fd():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(2, 5, 6))
    w = rng.normal(size=(3, 2, 3, 3))
    up = rng.normal(size=(3, 5, 6))

    tx = Tensor(x.copy(), requires_grad=True)
    tw = Tensor(w.copy(), requires_grad=True)
    (conv2d(tx, tw) * Tensor(up)).sum().backward()

    h = 1e-6
    for t, arr, got in ((0, x, tx.grad), (1, w, tw.grad)):
        fd = np.zeros_like(arr)
        flat, fdf = arr.reshape(-1), fd.reshape(-1)
        for i in range(0, flat.size, 7):  # probe a spread of entries
            orig = flat[i]
            flat[i] = orig + h
            fp = float((conv2d(Tensor(x), Tensor(w)).data * up).sum())
            flat[i] = orig - h
            fm = float((conv2d(Tensor(x), Tensor(w)).data * up).sum())
            flat[i] = orig
            fdf[i] = (fp - fm) / (2 * h)
            assert abs(fdf[i] - got.reshape(-1)[i]) < 1e-4 * max(1.0, abs(fdf[i]))


def test_conv3d_identity_kernel():
    x = np.random.default_rng(3).normal(size=(2, 4, 4, 4))
    w = np.zeros((2, 2, 3, 3, 3))
    w[0, 0, 1, 1, 1] = 1.0
    w[1, 1, 1, 1, 1] = 1.0
    got = conv3d(Tensor(x), Tensor(w)).data
    assert np.allclose(got, x, atol=1e-12)


def test_conv3d_matches_scipy():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(2, 4, 5, 4))
    w = rng.normal(size=(3, 2, 3, 3, 3))
    got = conv3d(Tensor(x), Tensor(w)).data
    want = np.zeros_like(got)
    for o in range(3):
        for i in range(2):
            want[o] += correlate(x[i], w[o, i], mode="same")
    assert np.allclose(got, want, atol=1e-10)


def test_avg_pool2d_oracle():
    x = np.arange(16.0).reshape(1, 4, 4)
    out = avg_pool2d(Tensor(x), 2).data
    want = np.array([[[2.5, 4.5], [10.5, 12.5]]])
    assert np.array_equal(out, want)


def test_avg_pool2d_grad_spreads_evenly():
    x = Tensor(np.zeros((1, 4, 4)), requires_grad=True)
    avg_pool2d(x, 2).sum().backward()
    assert np.allclose(x.grad, 0.25)
