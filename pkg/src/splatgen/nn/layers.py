"""Transformer building blocks on the autodiff kit.

All layers register their parameters into a ParamStore under a name prefix
and are plain callables.  Token layouts are (N, D) or batched (B, N, D);
attention broadcasts over leading dims via batched matmul.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from . import tensor as T
from .params import ParamStore
from .tensor import Tensor


def xavier_uniform(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    bound = float(np.sqrt(6.0 / (d_in + d_out)))
    return rng.uniform(-bound, bound, size=(d_in, d_out))


class Linear:
    def __init__(self, store: ParamStore, name: str, d_in: int, d_out: int,
                 rng: np.random.Generator, zero: bool = False, bias: bool = True,
                 bias_init: float | np.ndarray = 0.0):
        w = np.zeros((d_in, d_out)) if zero else xavier_uniform(rng, d_in, d_out)
        self.w = store.add(f"{name}.w", w)
        self.b = store.add(f"{name}.b", np.zeros(d_out) + bias_init) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = x @ self.w
        if self.b is not None:
            out = out + self.b
        return out


class LayerNorm:
    """Normalize over the last axis; learned affine."""

    def __init__(self, store: ParamStore, name: str, dim: int, eps: float = 1e-5):
        self.gamma = store.add(f"{name}.gamma", np.ones(dim))
        self.beta = store.add(f"{name}.beta", np.zeros(dim))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        inv = (var + self.eps) ** -0.5
        return centered * inv * self.gamma + self.beta


class MLP:
    """linear -> GeLU -> linear."""

    def __init__(self, store: ParamStore, name: str, d_in: int, d_hidden: int,
                 d_out: int, rng: np.random.Generator, zero_out: bool = False):
        self.fc1 = Linear(store, f"{name}.fc1", d_in, d_hidden, rng)
        self.fc2 = Linear(store, f"{name}.fc2", d_hidden, d_out, rng, zero=zero_out)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(T.gelu(self.fc1(x)))


def _split_heads(x: Tensor, heads: int) -> Tensor:
    # (..., N, D) -> (..., H, N, D/H)
    shp = x.shape
    n, d = shp[-2], shp[-1]
    dh = d // heads
    x = x.reshape(shp[:-2] + (n, heads, dh))
    axes = tuple(range(len(shp) - 2)) + (len(shp) - 2 + 1, len(shp) - 2, len(shp))
    return x.transpose(axes)


def _merge_heads(x: Tensor) -> Tensor:
    # (..., H, N, dh) -> (..., N, H*dh)
    shp = x.shape
    h, n, dh = shp[-3], shp[-2], shp[-1]
    axes = tuple(range(len(shp) - 3)) + (len(shp) - 2, len(shp) - 3, len(shp) - 1)
    return x.transpose(axes).reshape(shp[:-3] + (n, h * dh))


class MultiHeadAttention:
    """Scaled dot-product attention with separate q/k/v/out projections.

    Query tokens attend over context tokens; context defaults to the
    queries themselves (self-attention).  Softmax rows sum to 1.
    """

    def __init__(self, store: ParamStore, name: str, dim: int, heads: int,
                 rng: np.random.Generator, ctx_dim: int | None = None,
                 zero_out: bool = False):
        if dim % heads != 0:
            raise ShapeMismatch(f"dim {dim} not divisible by heads {heads}")
        ctx_dim = dim if ctx_dim is None else ctx_dim
        self.heads = heads
        self.dim = dim
        self.wq = Linear(store, f"{name}.wq", dim, dim, rng)
        self.wk = Linear(store, f"{name}.wk", ctx_dim, dim, rng)
        self.wv = Linear(store, f"{name}.wv", ctx_dim, dim, rng)
        self.wo = Linear(store, f"{name}.wo", dim, dim, rng, zero=zero_out)

    def __call__(self, queries: Tensor, context: Tensor | None = None,
                 return_weights: bool = False):
        if context is None:
            context = queries
        q = _split_heads(self.wq(queries), self.heads)
        k = _split_heads(self.wk(context), self.heads)
        v = _split_heads(self.wv(context), self.heads)
        dh = self.dim // self.heads
        kt_axes = tuple(range(k.ndim - 2)) + (k.ndim - 1, k.ndim - 2)
        scores = (q @ k.transpose(kt_axes)) * (1.0 / np.sqrt(dh))
        weights = T.softmax(scores, axis=-1)
        out = self.wo(_merge_heads(weights @ v))
        if return_weights:
            return out, weights.data.copy()
        return out


class TransformerBlock:
    """Pre-norm residual block: [cross-attn ->] self-attn -> MLP.

    With zero-initialized residual output projections the block is the
    identity map.
    """

    def __init__(self, store: ParamStore, name: str, dim: int, heads: int,
                 rng: np.random.Generator, ctx_dim: int | None = None,
                 with_cross: bool = True, mlp_ratio: int = 4,
                 zero_out: bool = False):
        self.with_cross = with_cross
        if with_cross:
            self.ln_cross = LayerNorm(store, f"{name}.ln_cross", dim)
            self.cross = MultiHeadAttention(store, f"{name}.cross", dim, heads, rng,
                                            ctx_dim=ctx_dim, zero_out=zero_out)
        self.ln_self = LayerNorm(store, f"{name}.ln_self", dim)
        self.self_attn = MultiHeadAttention(store, f"{name}.self", dim, heads, rng,
                                            zero_out=zero_out)
        self.ln_mlp = LayerNorm(store, f"{name}.ln_mlp", dim)
        self.mlp = MLP(store, f"{name}.mlp", dim, dim * mlp_ratio, dim, rng,
                       zero_out=zero_out)

    def __call__(self, tokens: Tensor, context: Tensor | None = None) -> Tensor:
        x = tokens
        if self.with_cross:
            if context is None:
                raise ShapeMismatch("cross-attention block needs a context")
            x = x + self.cross(self.ln_cross(x), context)
        x = x + self.self_attn(self.ln_self(x))
        x = x + self.mlp(self.ln_mlp(x))
        return x
