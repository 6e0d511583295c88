import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splatgen.errors import IndivisibleWidth, ShapeMismatch
from splatgen.nn import (
    Tensor,
    bilinear_sample,
    collapse_features,
    expand_features,
    gather_trilinear,
    scatter_average,
)


def test_expand_identity_at_factor_one():
    x = np.random.default_rng(0).normal(size=(5, 6))
    assert np.array_equal(expand_features(x, 1), x)


def test_expand_element_map():
    # element (n, c*factor + k) -> row n*factor + k, column c
    n, c, r = 3, 2, 4
    x = np.arange(n * c * r, dtype=np.float64).reshape(n, c * r)
    out = expand_features(x, r)
    assert out.shape == (n * r, c)
    for i in range(n):
        for cc in range(c):
            for k in range(r):
                assert out[i * r + k, cc] == x[i, cc * r + k]


def test_expand_collapse_roundtrip_bitwise():
    rng = np.random.default_rng(1)
    for n in (1, 3, 16):
        for r in (1, 2, 4, 8):
            x = rng.normal(size=(n, 8 * r))
            back = collapse_features(expand_features(x, r), r)
            assert np.array_equal(back, x)


@given(
    n=st.integers(1, 64),
    c=st.integers(1, 8),
    r=st.sampled_from([1, 2, 4, 8]),
    seed=st.integers(0, 2**31 - 1),
)
@settings(max_examples=80, deadline=None)
def test_expand_is_a_bijection(n, c, r, seed):
    x = np.random.default_rng(seed).normal(size=(n, c * r))
    out = expand_features(x, r)
    assert out.shape == (n * r, c)
    assert np.array_equal(np.sort(out.reshape(-1)), np.sort(x.reshape(-1)))
    assert np.array_equal(collapse_features(out, r), x)


def test_expand_rejects_indivisible():
    with pytest.raises(IndivisibleWidth):
        expand_features(np.zeros((2, 7)), 2)
    with pytest.raises(ShapeMismatch):
        expand_features(np.zeros((2, 2, 2)), 2)


def test_expand_tensor_grad_is_permutation():
    x = Tensor(np.arange(8.0).reshape(2, 4), requires_grad=True)
    out = expand_features(x, 2)
    (out * Tensor(np.arange(8.0).reshape(4, 2))).sum().backward()
    # gradient permutes back: d/dx[n, c*r+k] = upstream[n*r+k, c]
    up = np.arange(8.0).reshape(4, 2)
    want = np.zeros((2, 4))
    for i in range(2):
        for cc in range(2):
            for k in range(2):
                want[i, cc * 2 + k] = up[i * 2 + k, cc]
    assert np.array_equal(x.grad, want)


def test_gather_at_voxel_centers():
    # a position exactly on a voxel node reads that node's value
    g = 4
    voxels = np.arange(g**3, dtype=np.float64).reshape(-1, 1)
    # node coordinates in [-1,1]: i / (g-1) * 2 - 1
    pos = np.array([[-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]])
    out = gather_trilinear(Tensor(voxels), pos, g).data
    assert out[0, 0] == voxels[0, 0]
    assert out[1, 0] == voxels[-1, 0]


def test_gather_midpoint_averages():
    g = 2
    voxels = np.zeros((8, 1))
    voxels[:, 0] = np.arange(8.0)
    mid = np.zeros((1, 3))  # center of the cube: average of all 8 corners
    out = gather_trilinear(Tensor(voxels), mid, g).data
    assert out[0, 0] == pytest.approx(np.mean(np.arange(8.0)))


def test_scatter_then_gather_constant_field():
    # scattering a constant feature and gathering anywhere returns it
    rng = np.random.default_rng(2)
    pos = rng.uniform(-0.9, 0.9, size=(40, 3))
    feats = np.full((40, 2), 3.5)
    vox = scatter_average(Tensor(feats), pos, 8)
    got = gather_trilinear(vox, pos, 8).data
    touched = got[np.abs(got[:, 0]) > 1e-9]
    assert np.allclose(touched, 3.5, atol=1e-6)


def test_scatter_average_normalizes():
    # two points at the same node with different values -> their mean
    g = 4
    node = np.array([[-1.0, -1.0, -1.0], [-1.0, -1.0, -1.0]])
    feats = np.array([[1.0], [3.0]])
    vox = scatter_average(Tensor(feats), node, g).data
    assert vox[0, 0] == pytest.approx(2.0)


def test_bilinear_sample_nodes_and_midpoints():
    r = 3
    plane = np.zeros((r, r, 1))
    plane[:, :, 0] = np.arange(9.0).reshape(3, 3)
    # node (0,0) is uv (-1,-1); node (2,2) is uv (1,1)
    uv = np.array([[-1.0, -1.0], [1.0, 1.0], [0.0, 0.0], [-1.0, 0.0]])
    out = bilinear_sample(Tensor(plane), uv).data[:, 0]
    assert out[0] == 0.0
    assert out[1] == 8.0
    assert out[2] == 4.0  # center node
    assert out[3] == pytest.approx(1.0)  # midpoint of first axis edge: row 0, col 1


def test_bilinear_sample_grad_flows_to_plane():
    plane = Tensor(np.zeros((3, 3, 2)), requires_grad=True)
    uv = np.array([[0.0, 0.0]])
    bilinear_sample(plane, uv).sum().backward()
    assert plane.grad is not None
    assert plane.grad.sum() == pytest.approx(2.0)  # one unit per channel
