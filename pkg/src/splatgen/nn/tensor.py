"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps an ndarray and records, for every op, its parent tensors and
a vjp closure mapping the upstream gradient to per-parent gradients.
backward() runs the tape in reverse topological order.  By default the
recording is released afterward (closures dropped); calling backward again
on the same graph raises GraphConsumed.  Gradients accumulate into .grad of
leaf tensors with requires_grad=True across separate backward calls.

Only float32/float64 arrays are supported; ops follow numpy dtype promotion.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf as _erf

from ..errors import GraphConsumed, NonFiniteInput, ShapeMismatch

_DEBUG_NAN = False


def set_debug_nan(flag: bool) -> None:
    """Toggle per-op finiteness assertions (slow; for tests/debugging)."""
    global _DEBUG_NAN
    _DEBUG_NAN = bool(flag)


def _as_float_array(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    return arr


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp", "_consumed")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_float_array(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._vjp = None
        self._consumed = False

    # -- introspection ----------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    # -- graph construction ------------------------------------------------
    @staticmethod
    def _make(data, parents, vjp) -> "Tensor":
        if _DEBUG_NAN and not np.all(np.isfinite(data)):
            raise NonFiniteInput("op produced NaN/Inf (debug NaN guard)")
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._vjp = vjp
        return out

    # -- autodiff ----------------------------------------------------------
    def backward(self, retain: bool = False) -> None:
        """Accumulate d(self)/d(leaf) into .grad of requires_grad leaves.

        self must be scalar (size 1).  Unless retain is true, the recording
        is released; a second backward raises GraphConsumed.
        """
        if self.size != 1:
            raise ShapeMismatch(f"backward needs a scalar loss, got shape {self.shape}")
        if self._consumed:
            raise GraphConsumed("backward already released this graph")
        if not self.requires_grad:
            return

        order: list[Tensor] = []
        seen = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        flowing: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = flowing.pop(id(node), None)
            if g is None:
                continue
            if node._vjp is not None:
                parent_grads = node._vjp(g)
                for p, pg in zip(node._parents, parent_grads):
                    if pg is None or not p.requires_grad:
                        continue
                    pg = np.asarray(pg, dtype=p.data.dtype)
                    if pg.shape != p.data.shape:
                        pg = pg.reshape(p.data.shape)
                    key = id(p)
                    if key in flowing:
                        flowing[key] = flowing[key] + pg
                    else:
                        flowing[key] = pg
            else:
                # leaf: accumulate into .grad
                if node.grad is None:
                    node.grad = g.astype(node.data.dtype, copy=True)
                else:
                    node.grad = node.grad + g.astype(node.data.dtype)
            if not retain and node is not self:
                node._vjp = None
                node._parents = ()
        if not retain:
            self._consumed = True
            self._vjp = None
            self._parents = ()

    # -- operators ----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        return reshape(self, *shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# -- elementwise arithmetic --------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor._make(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor._make(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor._make(
        a.data * b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        ),
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor._make(
        a.data / b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        ),
    )


def power(a, p: float) -> Tensor:
    a = as_tensor(a)
    p = float(p)
    out = a.data**p
    return Tensor._make(out, (a,), lambda g: (g * p * a.data ** (p - 1.0),))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return Tensor._make(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return Tensor._make(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return Tensor._make(out, (a,), lambda g: (g * 0.5 / out,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return Tensor._make(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # stable logistic
    out = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                   np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))
    out = out.astype(a.data.dtype)
    return Tensor._make(out, (a,), lambda g: (g * out * (1.0 - out),))


def absolute(a) -> Tensor:
    a = as_tensor(a)
    return Tensor._make(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp with pass-through gradient inside [lo, hi], zero outside."""
    a = as_tensor(a)
    mask = (a.data >= lo) & (a.data <= hi)
    return Tensor._make(np.clip(a.data, lo, hi), (a,), lambda g: (g * mask,))


def gelu(a) -> Tensor:
    """Exact-erf GeLU: 0.5 x (1 + erf(x / sqrt(2)))."""
    a = as_tensor(a)
    x = a.data
    phi = 0.5 * (1.0 + _erf(x / np.sqrt(2.0)))
    out = x * phi

    def vjp(g):
        pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
        return (g * (phi + x * pdf),)

    return Tensor._make(out, (a,), vjp)


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return Tensor._make(out, (a,), vjp)


# -- shape ops ----------------------------------------------------------------

def reshape(a, *shape) -> Tensor:
    a = as_tensor(a)
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    old = a.data.shape
    return Tensor._make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return Tensor._make(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),))


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), vjp)


def getitem(a, idx) -> Tensor:
    """Basic slicing or integer-array indexing; backward scatters with add.at."""
    a = as_tensor(a)
    out = a.data[idx]

    def vjp(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return Tensor._make(np.array(out, copy=True), (a,), vjp)


def index_gather(a, index, axis0_size=None) -> Tensor:
    """Row gather: out[i] = a[index[i]].  Duplicate indices allowed."""
    index = np.asarray(index)
    return getitem(a, index)


def scatter_add(values, index, size: int) -> Tensor:
    """out[j] = sum of values rows i with index[i] == j; out has `size` rows."""
    values = as_tensor(values)
    index = np.asarray(index, dtype=np.int64)
    out_shape = (size,) + values.data.shape[1:]
    out = np.zeros(out_shape, dtype=values.data.dtype)
    np.add.at(out, index, values.data)
    return Tensor._make(out, (values,), lambda g: (g[index],))


# -- reductions ----------------------------------------------------------------

def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        g = np.asarray(g)
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        ax = axis if isinstance(axis, tuple) else (axis,)
        if not keepdims:
            for axx in sorted(ax):
                g = np.expand_dims(g, axx % a.data.ndim)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return Tensor._make(out, (a,), vjp)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.data.size
    else:
        ax = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.data.shape[i] for i in ax]))
    # true division, not reciprocal multiply: bitwise-matches np.mean
    return tsum(a, axis=axis, keepdims=keepdims) / float(count)


# -- matmul --------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    """Matrix product with numpy batch broadcasting on leading dims."""
    a, b = as_tensor(a), as_tensor(b)

    def vjp(g):
        bd = b.data
        ad = a.data
        if bd.ndim == 1:
            ga = np.outer(g, bd) if ad.ndim == 2 else g[..., None] * bd
            gb = (ad * g[..., None]).sum(axis=tuple(range(ad.ndim - 1)))
            return ga.reshape(ad.shape), gb
        if ad.ndim == 1:
            ga = (g[..., None, :] * bd).sum(axis=-1).sum(axis=tuple(range(bd.ndim - 2)))
            gb = np.einsum("i,...j->...ij", ad, g) if bd.ndim > 2 else np.outer(ad, g)
            return ga.reshape(ad.shape), _unbroadcast(gb, bd.shape)
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return Tensor._make(a.data @ b.data, (a, b), vjp)


def custom_op(data: np.ndarray, parents, vjp) -> Tensor:
    """Register an externally computed op on the tape.

    vjp(upstream) must return one gradient per parent (None to skip).
    Used for ops whose forward/backward are computed outside the tape,
    e.g. the splat rasterizer.
    """
    return Tensor._make(data, tuple(as_tensor(p) for p in parents), vjp)
