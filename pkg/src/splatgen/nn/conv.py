"""Convolution primitives (im2col GEMM) and pooling.

conv2d/conv3d are stride-1, same-padding, odd-kernel ops registered on the
tape with explicit vjps; col2im scatters are plain shifted adds, so both
directions are deterministic.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch
from .tensor import Tensor, as_tensor


def conv2d(x, w, b=None) -> Tensor:
    """x (Cin,H,W), w (Cout,Cin,kh,kw) odd kernel, optional b (Cout,) -> (Cout,H,W)."""
    x, w = as_tensor(x), as_tensor(w)
    cin, h, wid = x.shape
    cout, cin_w, kh, kw = w.shape
    if cin_w != cin or kh % 2 == 0 or kw % 2 == 0:
        raise ShapeMismatch(f"conv2d weight {w.shape} incompatible with input {x.shape}")
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x.data, ((0, 0), (ph, ph), (pw, pw)))
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # (Cin,H,W,kh,kw)
    col = win.transpose(1, 2, 0, 3, 4).reshape(h * wid, cin * kh * kw)
    w_mat = w.data.reshape(cout, cin * kh * kw)
    out = (col @ w_mat.T).T.reshape(cout, h, wid)
    if b is not None:
        b = as_tensor(b)
        out = out + b.data[:, None, None]

    parents = (x, w) if b is None else (x, w, b)

    def vjp(g):
        g_mat = g.reshape(cout, h * wid).T  # (HW, Cout)
        gw = (g_mat.T @ col).reshape(w.data.shape)
        g_col = (g_mat @ w_mat).reshape(h, wid, cin, kh, kw)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, i : i + h, j : j + wid] += g_col[:, :, :, i, j].transpose(2, 0, 1)
        gx = gxp[:, ph : ph + h, pw : pw + wid]
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=(1, 2))

    return Tensor._make(out, parents, vjp)


def conv3d(x, w, b=None) -> Tensor:
    """x (Cin,D1,D2,D3), w (Cout,Cin,k,k,k) odd kernel, optional b -> (Cout,D1,D2,D3)."""
    x, w = as_tensor(x), as_tensor(w)
    cin, d1, d2, d3 = x.shape
    cout, cin_w, k1, k2, k3 = w.shape
    if cin_w != cin or any(k % 2 == 0 for k in (k1, k2, k3)):
        raise ShapeMismatch(f"conv3d weight {w.shape} incompatible with input {x.shape}")
    p1, p2, p3 = k1 // 2, k2 // 2, k3 // 2
    xp = np.pad(x.data, ((0, 0), (p1, p1), (p2, p2), (p3, p3)))
    win = sliding_window_view(xp, (k1, k2, k3), axis=(1, 2, 3))  # (Cin,D1,D2,D3,k,k,k)
    col = win.transpose(1, 2, 3, 0, 4, 5, 6).reshape(d1 * d2 * d3, cin * k1 * k2 * k3)
    w_mat = w.data.reshape(cout, cin * k1 * k2 * k3)
    out = (col @ w_mat.T).T.reshape(cout, d1, d2, d3)
    if b is not None:
        b = as_tensor(b)
        out = out + b.data[:, None, None, None]

    parents = (x, w) if b is None else (x, w, b)

    def vjp(g):
        g_mat = g.reshape(cout, -1).T
        gw = (g_mat.T @ col).reshape(w.data.shape)
        g_col = (g_mat @ w_mat).reshape(d1, d2, d3, cin, k1, k2, k3)
        gxp = np.zeros_like(xp)
        for i in range(k1):
            for j in range(k2):
                for l in range(k3):
                    gxp[:, i : i + d1, j : j + d2, l : l + d3] += (
                        g_col[:, :, :, :, i, j, l].transpose(3, 0, 1, 2)
                    )
        gx = gxp[:, p1 : p1 + d1, p2 : p2 + d2, p3 : p3 + d3]
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=(1, 2, 3))

    return Tensor._make(out, parents, vjp)


def avg_pool2d(x: Tensor, factor: int = 2) -> Tensor:
    """Non-overlapping average pooling on (C,H,W); H, W divisible by factor."""
    c, h, w = x.shape
    if h % factor or w % factor:
        raise ShapeMismatch(f"pool factor {factor} does not divide {(h, w)}")
    return x.reshape(c, h // factor, factor, w // factor, factor).mean(axis=(2, 4))
