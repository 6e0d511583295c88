import numpy as np
import pytest

from splatgen import nn
from splatgen.errors import CheckpointMismatch, MissingGradient
from splatgen.nn import (
    LayerNorm,
    Linear,
    MLP,
    MultiHeadAttention,
    ParamStore,
    Tensor,
    TransformerBlock,
    load_checkpoint,
    save_checkpoint,
)


def test_linear_affine_oracle():
    store = ParamStore(dtype=np.float64)
    rng = np.random.default_rng(0)
    lin = Linear(store, "l", 3, 2, rng)
    w = store["l.w"].data
    b = store["l.b"].data
    x = rng.normal(size=(5, 3))
    out = lin(Tensor(x)).data
    assert np.allclose(out, x @ w + b, atol=1e-12)


def test_linear_bias_init_array():
    store = ParamStore(dtype=np.float64)
    lin = Linear(store, "l", 2, 3, np.random.default_rng(0),
                 bias_init=np.array([0.0, 1.0, -2.0]))
    assert np.array_equal(store["l.b"].data, [0.0, 1.0, -2.0])


def test_layernorm_normalizes():
    store = ParamStore(dtype=np.float64)
    ln = LayerNorm(store, "ln", 8)
    x = np.random.default_rng(1).normal(2.0, 3.0, size=(4, 8))
    out = ln(Tensor(x)).data
    assert np.allclose(out.mean(axis=-1), 0.0, atol=1e-9)
    assert np.allclose(out.std(axis=-1), 1.0, atol=1e-3)


def test_adam_first_step_is_signed_lr():
    # with bias correction, step 1 moves each weight by ~lr*sign(grad)
    store = ParamStore(dtype=np.float64)
    store.add("p", np.zeros(3))
    store["p"].grad = np.array([0.5, -2.0, 1e-3])
    store.adam_step(lr=0.1)
    expect = -0.1 * np.sign([0.5, -2.0, 1e-3])
    assert np.allclose(store["p"].data, expect, rtol=1e-4)


def test_adam_requires_some_gradient():
    store = ParamStore(dtype=np.float64)
    store.add("p", np.zeros(3))
    with pytest.raises(MissingGradient):
        store.adam_step(lr=0.1)


def test_adam_descends_quadratic():
    store = ParamStore(dtype=np.float64)
    store.add("x", np.array([3.0, -2.0]))
    for _ in range(400):
        x = store["x"]
        loss = (x * x).sum()
        loss.backward()
        store.adam_step(lr=0.05)
        store.zero_grad()
    assert np.abs(store["x"].data).max() < 1e-2


def test_attention_single_key_returns_projected_value():
    # with one key/value token the softmax is 1 regardless of scores, so the
    # output is v W_o + b_o for any query
    store = ParamStore(dtype=np.float64)
    rng = np.random.default_rng(2)
    attn = MultiHeadAttention(store, "a", 8, 2, rng)
    q = rng.normal(size=(5, 8))
    kv = rng.normal(size=(1, 8))
    out = attn(Tensor(q), Tensor(kv)).data
    v = kv @ store["a.wv.w"].data + store["a.wv.b"].data
    want = v @ store["a.wo.w"].data + store["a.wo.b"].data
    assert np.allclose(out, np.repeat(want, 5, axis=0), atol=1e-9)


def test_attention_weights_rowsum():
    store = ParamStore(dtype=np.float64)
    rng = np.random.default_rng(3)
    attn = MultiHeadAttention(store, "a", 8, 2, rng)
    x = rng.normal(size=(4, 8))
    _, w = attn(Tensor(x), return_weights=True)
    assert w.shape == (2, 4, 4)
    assert np.allclose(w.sum(axis=-1), 1.0, atol=1e-9)


def test_zero_out_block_is_identity():
    store = ParamStore(dtype=np.float64)
    rng = np.random.default_rng(4)
    blk = TransformerBlock(store, "b", 16, 4, rng, with_cross=False, zero_out=True)
    x = rng.normal(size=(6, 16))
    out = blk(Tensor(x)).data
    assert np.allclose(out, x, atol=1e-12)


def test_block_with_cross_attends_context():
    store = ParamStore(dtype=np.float64)
    rng = np.random.default_rng(5)
    blk = TransformerBlock(store, "b", 16, 4, rng, ctx_dim=8, with_cross=True)
    x = rng.normal(size=(6, 16))
    ctx_a = rng.normal(size=(3, 8))
    ctx_b = rng.normal(size=(3, 8))
    out_a = blk(Tensor(x), Tensor(ctx_a)).data
    out_b = blk(Tensor(x), Tensor(ctx_b)).data
    assert not np.allclose(out_a, out_b)


def test_mlp_shapes_and_zero_out():
    store = ParamStore(dtype=np.float64)
    rng = np.random.default_rng(6)
    mlp = MLP(store, "m", 4, 8, 2, rng, zero_out=True)
    x = rng.normal(size=(3, 4))
    assert np.allclose(mlp(Tensor(x)).data, 0.0)


def test_freeze_blocks_updates():
    store = ParamStore(dtype=np.float64)
    store.add("p", np.ones(2))
    store.freeze()
    loss = (store["p"] * store["p"]).sum()
    loss.backward()
    before = store["p"].data.copy()
    with pytest.raises(MissingGradient):
        store.adam_step(lr=0.1)
    assert np.array_equal(store["p"].data, before)
    store.unfreeze()


def test_checkpoint_roundtrip(tmp_path):
    store = ParamStore(dtype=np.float32)
    rng = np.random.default_rng(7)
    Linear(store, "l", 3, 3, rng)
    p = tmp_path / "w.ntc"
    save_checkpoint(p, store.state_dict(), {"note": "x"})
    tensors, extra = load_checkpoint(p)
    assert extra["note"] == "x"
    assert np.array_equal(tensors["l.w"], store["l.w"].data)

    other = ParamStore(dtype=np.float32)
    Linear(other, "l", 3, 3, np.random.default_rng(8))
    other.load_state_dict(tensors)
    assert np.array_equal(other["l.w"].data, store["l.w"].data)


def test_load_state_dict_shape_guard():
    a = ParamStore(dtype=np.float32)
    a.add("p", np.zeros((2, 2), dtype=np.float32))
    with pytest.raises(CheckpointMismatch):
        a.load_state_dict({"p": np.zeros((3, 3), dtype=np.float32)})
    with pytest.raises(CheckpointMismatch):
        a.load_state_dict({"q": np.zeros((2, 2), dtype=np.float32)})
