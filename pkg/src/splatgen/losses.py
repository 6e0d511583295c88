"""Supervision losses.

- rendering_loss: mean absolute error over rgb+alpha plus a weighted
  perceptual term.
- perceptual_proxy: multi-scale feature distance under fixed random
  convolutions (a stand-in for a pretrained perceptual metric, behind the
  same two-image interface so a heavier implementation can drop in).
- chamfer_attribute_loss: bidirectional nearest-neighbor matching on means
  with L1 penalties on all matched attributes; the assignment is treated
  as constant during backward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coarse import GaussianTensors
from .errors import EmptySet, ShapeMismatch
from .gaussians import GaussianSet
from . import nn
from .nn import Tensor, as_tensor
from .render.image import ImageRGBA


@dataclass(frozen=True)
class LossWeights:
    """Weights: omega1 scales the perceptual term inside rendering_loss;
    w_chamfer/w_render weigh the two stage-1 terms; w1/w2 weigh the two
    Chamfer directions."""

    omega1: float = 2.0
    w_chamfer: float = 10.0
    w_render: float = 1.0
    w1: float = 1.0
    w2: float = 1.0

    def __post_init__(self):
        for f in ("omega1", "w_chamfer", "w_render", "w1", "w2"):
            if getattr(self, f) < 0:
                raise ValueError(f"{f} must be >= 0")


def _as_rgba_tensor(img) -> Tensor:
    if isinstance(img, ImageRGBA):
        return Tensor(img.as_array())
    t = as_tensor(img)
    if t.ndim != 3 or t.shape[2] != 4:
        raise ShapeMismatch(f"expected (H,W,4) rgba, got {t.shape}")
    return t


def rendering_loss(pred, gt, weights: LossWeights | None = None) -> Tensor:
    """MAE over the four rgba channels + omega1 * perceptual_proxy(rgb)."""
    weights = weights or LossWeights()
    p = _as_rgba_tensor(pred)
    g = _as_rgba_tensor(gt)
    if p.shape != g.shape:
        raise ShapeMismatch(f"pred {p.shape} vs gt {g.shape}")
    loss = nn.absolute(p - g).mean()
    if weights.omega1 > 0:
        loss = loss + weights.omega1 * perceptual_proxy(p[:, :, 0:3], g[:, :, 0:3])
    return loss


# -- perceptual proxy --------------------------------------------------------

PROXY_SEED = 7
PROXY_CHANNELS = 12
PROXY_SCALES = (1, 2, 4)
PROXY_RAW_WEIGHT = 0.25

_proxy_kernels: dict[int, list[np.ndarray]] = {}


def _kernels(seed: int) -> list[np.ndarray]:
    if seed not in _proxy_kernels:
        rng = np.random.default_rng(seed)
        _proxy_kernels[seed] = [
            rng.normal(0.0, np.sqrt(2.0 / (3 * 9)), size=(PROXY_CHANNELS, 3, 3, 3))
            for _ in PROXY_SCALES
        ]
    return _proxy_kernels[seed]


def _normalized_features(x: Tensor, kernel: np.ndarray) -> Tensor:
    f = nn.conv2d(x, kernel)  # (C,H,W)
    norm = nn.sqrt((f * f).sum(axis=0, keepdims=True) + 1e-6)
    return f / norm


def perceptual_proxy(pred, gt, seed: int = PROXY_SEED) -> Tensor:
    """Structure-sensitive image distance; zero iff the images are identical.

    Mean squared distance between channel-normalized responses of fixed
    random 3x3 convolutions at full, half and quarter resolution, plus a
    small raw MSE term (which makes zero imply pixel equality).
    """
    p = as_tensor(pred)
    g = as_tensor(gt)
    if p.shape != g.shape:
        raise ShapeMismatch(f"pred {p.shape} vs gt {g.shape}")
    h, w = p.shape[0], p.shape[1]
    if p.ndim != 3 or p.shape[2] != 3:
        raise ShapeMismatch(f"expected (H,W,3) rgb, got {p.shape}")
    if h < 16 or w < 16 or h % 4 or w % 4:
        raise ShapeMismatch(f"images must be at least 16x16 with sides divisible by 4, got {h}x{w}")

    diff = p - g
    total = PROXY_RAW_WEIGHT * (diff * diff).mean()
    pc = p.transpose((2, 0, 1))
    gc = g.transpose((2, 0, 1))
    for kernel, factor in zip(_kernels(seed), PROXY_SCALES):
        ps = nn.avg_pool2d(pc, factor) if factor > 1 else pc
        gs = nn.avg_pool2d(gc, factor) if factor > 1 else gc
        d = _normalized_features(ps, kernel) - _normalized_features(gs, kernel)
        total = total + (1.0 / len(PROXY_SCALES)) * (d * d).mean()
    return total


# -- attribute chamfer -------------------------------------------------------

def _attribute_rows(obj) -> tuple[np.ndarray, Tensor]:
    """(means float64 (N,3) for matching, (N,7) attribute rows) from a
    GaussianSet, GaussianTensors, or (means, colors, opacities) triple."""
    if isinstance(obj, GaussianSet):
        parts = (Tensor(obj.means), Tensor(obj.colors), Tensor(obj.opacities))
    elif isinstance(obj, GaussianTensors):
        parts = (obj.means, obj.colors, obj.opacities)
    elif isinstance(obj, (tuple, list)) and len(obj) == 3:
        parts = tuple(as_tensor(x) for x in obj)
    else:
        raise ShapeMismatch(f"cannot read gaussian attributes from {type(obj).__name__}")
    means, colors, opac = parts
    n = means.shape[0]
    if n == 0:
        raise EmptySet("chamfer needs nonempty sets")
    if means.shape != (n, 3) or colors.shape != (n, 3) or opac.shape != (n,):
        raise ShapeMismatch("attribute shapes disagree")
    rows = nn.concat([means, colors, opac.reshape(n, 1)], axis=1)
    return np.asarray(means.data, dtype=np.float64), rows


def nearest_indices(query: np.ndarray, ref: np.ndarray, use_grid: bool = False) -> np.ndarray:
    """index[i] = argmin_j ||query_i - ref_j||^2, first index on ties."""
    if use_grid:
        return _nearest_grid(query, ref)
    d = query[:, None, :] - ref[None, :, :]
    return np.argmin((d * d).sum(axis=-1), axis=1)


def _nearest_grid(query: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Uniform-grid accelerated exact nearest neighbor (same ties as brute).

    Cubic cells of side c: any point in a cell at Chebyshev ring r from the
    query's cell is at least (r-1)*c away, so the ring scan can stop as
    soon as (r-1)*c exceeds the best distance found.
    """
    m = ref.shape[0]
    lo = ref.min(axis=0)
    span = float((ref.max(axis=0) - lo).max())
    if span == 0.0:  # all reference points coincide; ties resolve to index 0
        return np.zeros(query.shape[0], dtype=np.int64)
    k = max(1, int(np.ceil(m ** (1.0 / 3.0))))
    c = span / k
    cells: dict[tuple[int, int, int], list[int]] = {}
    ref_cell = np.floor((ref - lo) / c).astype(np.int64)
    for j in range(m):
        cells.setdefault(tuple(ref_cell[j]), []).append(j)
    cell_arrays = {key: np.asarray(v, dtype=np.int64) for key, v in cells.items()}

    out = np.empty(query.shape[0], dtype=np.int64)
    q_cell = np.floor((query - lo) / c).astype(np.int64)
    for i in range(query.shape[0]):
        qx, qy, qz = q_cell[i]
        best_d = np.inf
        best_j = -1
        r = 0
        while True:
            if best_j >= 0 and (r - 1) * c > np.sqrt(best_d):
                break
            hit_any = False
            for key, cand in cell_arrays.items():
                if max(abs(key[0] - qx), abs(key[1] - qy), abs(key[2] - qz)) != r:
                    continue
                hit_any = True
                d = ref[cand] - query[i]
                d2 = (d * d).sum(axis=1)
                j_loc = int(np.argmin(d2))
                dj, jj = d2[j_loc], int(cand[j_loc])
                if dj < best_d or (dj == best_d and jj < best_j):
                    best_d, best_j = dj, jj
            r += 1
            if not hit_any and best_j >= 0 and (r - 1) * c > np.sqrt(best_d):
                break
            if r > 3 * k + 2 and best_j >= 0:
                break
        out[i] = best_j
    return out


def chamfer_attribute_loss(p1, p2, weights: LossWeights | None = None,
                           use_grid: bool = False) -> Tensor:
    """w1 * mean over P1 of L1(attrs, matched P2 attrs) + w2 * symmetric term.

    Matching is by squared Euclidean distance of means only; the L1 runs
    over all 7 attribute channels (location, color, opacity).
    """
    weights = weights or LossWeights()
    means1, rows1 = _attribute_rows(p1)
    means2, rows2 = _attribute_rows(p2)
    fwd = nearest_indices(means1, means2, use_grid)
    bwd = nearest_indices(means2, means1, use_grid)
    # rows2 gathered by constant indices; both terms stay differentiable in
    # either side's attributes
    t1 = nn.absolute(rows1 - nn.index_gather(rows2, fwd)).sum(axis=1).mean()
    t2 = nn.absolute(rows2 - nn.index_gather(rows1, bwd)).sum(axis=1).mean()
    return weights.w1 * t1 + weights.w2 * t2


def psnr(pred: np.ndarray, gt: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for [0,1]-valued arrays."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs gt {gt.shape}")
    mse = float(((pred - gt) ** 2).mean())
    return -10.0 * np.log10(max(mse, 1e-12))
