"""Grid interpolation ops: plane bilinear sampling, voxel scatter/gather,
and the exact sub-point feature expansion.

Grid nodes span [-1,1] per axis with spacing 2/(G-1); a query exactly on a
node reproduces the stored node value exactly.  Voxel scatter/gather treat
the interpolation indices and weights as constants of the positions (the
standard point-voxel convention); gradients flow through feature values.
"""

from __future__ import annotations

import numpy as np

from ..errors import IndivisibleWidth, ShapeMismatch
from . import tensor as T
from .tensor import Tensor, as_tensor


def bilinear_sample(plane, uv) -> Tensor:
    """Sample a (R,R,F) plane at (N,2) coordinates in [-1,1]^2.

    Differentiable in both the plane features and the coordinates.  Axis 0
    of the plane is the first coordinate of the pair.
    """
    plane = as_tensor(plane)
    uv = as_tensor(uv)
    r = plane.shape[0]
    if plane.ndim != 3 or plane.shape[1] != r:
        raise ShapeMismatch(f"plane must be (R,R,F), got {plane.shape}")
    if uv.ndim != 2 or uv.shape[1] != 2:
        raise ShapeMismatch(f"uv must be (N,2), got {uv.shape}")
    g = (uv + 1.0) * (0.5 * (r - 1))  # grid coords in [0, R-1]
    gd = np.clip(g.data, 0.0, r - 1.0)
    i0 = np.minimum(np.floor(gd).astype(np.int64), r - 2)
    f = T.clip(g, 0.0, float(r - 1)) - i0.astype(g.dtype)  # (N,2) in [0,1]
    fx = f[:, 0:1]
    fy = f[:, 1:2]
    wx0, wx1 = 1.0 - fx, fx
    wy0, wy1 = 1.0 - fy, fy
    x0, y0 = i0[:, 0], i0[:, 1]
    c00 = plane[(x0, y0)]
    c01 = plane[(x0, y0 + 1)]
    c10 = plane[(x0 + 1, y0)]
    c11 = plane[(x0 + 1, y0 + 1)]
    return c00 * (wx0 * wy0) + c01 * (wx0 * wy1) + c10 * (wx1 * wy0) + c11 * (wx1 * wy1)


def trilinear_corners(positions: np.ndarray, grid: int) -> tuple[np.ndarray, np.ndarray]:
    """Flat corner indices (N,8) and weights (N,8) for positions in [-1,1]^3."""
    pos = np.asarray(positions, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[1] != 3:
        raise ShapeMismatch(f"positions must be (N,3), got {pos.shape}")
    g = np.clip((pos + 1.0) * (0.5 * (grid - 1)), 0.0, grid - 1.0)
    i0 = np.minimum(np.floor(g).astype(np.int64), grid - 2)
    f = g - i0
    n = pos.shape[0]
    idx = np.empty((n, 8), dtype=np.int64)
    w = np.empty((n, 8))
    corner = 0
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                ix = i0[:, 0] + dx
                iy = i0[:, 1] + dy
                iz = i0[:, 2] + dz
                idx[:, corner] = (ix * grid + iy) * grid + iz
                wx = f[:, 0] if dx else 1.0 - f[:, 0]
                wy = f[:, 1] if dy else 1.0 - f[:, 1]
                wz = f[:, 2] if dz else 1.0 - f[:, 2]
                w[:, corner] = wx * wy * wz
                corner += 1
    return idx, w


def scatter_average(features, positions: np.ndarray, grid: int) -> Tensor:
    """Trilinear scatter of (N,C) features to a (grid^3, C) voxel grid.

    Each voxel holds the weight-normalized average of its contributions
    (sum / max(weight, 1e-8)); untouched voxels are zero.
    """
    features = as_tensor(features)
    n, c = features.shape
    idx, w = trilinear_corners(positions, grid)
    rep = T.index_gather(features, np.repeat(np.arange(n), 8))  # (N*8, C)
    vals = rep * w.reshape(-1, 1).astype(features.dtype)
    num = T.scatter_add(vals, idx.reshape(-1), grid**3)
    den = np.zeros(grid**3)
    np.add.at(den, idx.reshape(-1), w.reshape(-1))
    den = np.maximum(den, 1e-8).astype(features.dtype)
    return num * (1.0 / den)[:, None]


def gather_trilinear(voxels, positions: np.ndarray, grid: int) -> Tensor:
    """Trilinear interpolation of a (grid^3, C) voxel grid at (N,3) positions."""
    voxels = as_tensor(voxels)
    idx, w = trilinear_corners(positions, grid)
    vals = T.index_gather(voxels, idx.reshape(-1))  # (N*8, C)
    vals = vals * w.reshape(-1, 1).astype(voxels.dtype)
    n = positions.shape[0]
    return vals.reshape(n, 8, voxels.shape[1]).sum(axis=1)


def expand_features(features, factor: int):
    """Reshape (N, C*factor) features into (N*factor, C) sub-point features.

    Element (n, c*factor + k) maps to row n*factor + k, column c: a pure
    memory permutation, hence exactly invertible (see collapse_features).
    Accepts an ndarray or a Tensor and returns the same kind.
    """
    is_tensor = isinstance(features, Tensor)
    shape = features.shape
    if len(shape) != 2:
        raise ShapeMismatch(f"features must be 2-D, got {shape}")
    n, width = shape
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if width % factor:
        raise IndivisibleWidth(f"width {width} not divisible by factor {factor}")
    c = width // factor
    if is_tensor:
        return features.reshape(n, c, factor).transpose((0, 2, 1)).reshape(n * factor, c)
    return np.ascontiguousarray(
        np.asarray(features).reshape(n, c, factor).transpose(0, 2, 1).reshape(n * factor, c)
    )


def collapse_features(features, factor: int):
    """Inverse of expand_features: (N*factor, C) -> (N, C*factor)."""
    is_tensor = isinstance(features, Tensor)
    shape = features.shape
    if len(shape) != 2:
        raise ShapeMismatch(f"features must be 2-D, got {shape}")
    m, c = shape
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if m % factor:
        raise IndivisibleWidth(f"row count {m} not divisible by factor {factor}")
    n = m // factor
    if is_tensor:
        return features.reshape(n, factor, c).transpose((0, 2, 1)).reshape(n, c * factor)
    return np.ascontiguousarray(
        np.asarray(features).reshape(n, factor, c).transpose(0, 2, 1).reshape(n, c * factor)
    )
