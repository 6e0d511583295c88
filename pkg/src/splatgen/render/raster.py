"""Tile-based forward rasterization of projected Gaussians (Eq.-3 blending).

Pipeline: project all Gaussians, depth-sort them once globally (ties broken
by index), bin them into 16x16 pixel tiles by conservative bounding box,
then blend front to back per pixel:

    C = sum_i c_i a_i prod_{j<i} (1 - a_j),   a_i = opacity_i * G_i(pixel)

with three piecewise rules: G is evaluated only inside the 3-sigma ellipse
of the low-passed screen covariance (the footprint is a property of the
splat, not of the tiling), contributions with a < 1/255 are skipped, and a
pixel stops accepting splats once its transmittance falls below 1e-4.
Alpha is 1 - final transmittance; rgb is composited over the background.

Per-pixel work is vectorized per tile; tiles touch disjoint pixels, so the
optional thread pool changes scheduling only, never values.  A BlendPlan
captured during the forward records, per pixel, the ordered contributing
splats; re-evaluating that frozen plan gives a smooth function of the
Gaussian parameters, which is what finite-difference checks difference.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..cameras import Camera
from ..errors import NonFiniteInput, ShapeMismatch
from ..gaussians import GaussianSet
from .image import ImageRGBA
from .project import (
    ALPHA_FLOOR,
    CUTOFF_SIGMA,
    TRANSMITTANCE_EPS,
    LOWPASS,
    ProjectedSplats,
)

TILE = 16
_CUTOFF_QF = CUTOFF_SIGMA * CUTOFF_SIGMA


@dataclass(frozen=True)
class BlendPlan:
    """Per-pixel ordered splat ids (into the original set), -1 padded."""

    ids: np.ndarray  # (H, W, L) int64

    @property
    def max_depth_count(self) -> int:
        return self.ids.shape[2]


def _check_background(background) -> np.ndarray:
    bg = np.asarray(background, dtype=np.float64)
    if bg.shape != (3,):
        raise ShapeMismatch(f"background must be (3,), got {bg.shape}")
    if not np.all(np.isfinite(bg)):
        raise NonFiniteInput("background contains NaN/Inf")
    return bg


def _tiles(height: int, width: int):
    for r0 in range(0, height, TILE):
        for c0 in range(0, width, TILE):
            yield r0, min(r0 + TILE, height), c0, min(c0 + TILE, width)


def _tile_select(proj: ProjectedSplats, r0, r1, c0, c1) -> np.ndarray:
    cx = proj.center[:, 0]
    cy = proj.center[:, 1]
    rad = proj.radius
    hit = (cx + rad > c0) & (cx - rad < c1) & (cy + rad > r0) & (cy - rad < r1)
    return np.nonzero(hit)[0]


def _tile_blend(proj: ProjectedSplats, sel: np.ndarray, r0, r1, c0, c1):
    """Blend one tile.  Returns (a, p_excl, processed, dx, dy, g) arrays of
    shape (M, P) plus the flat pixel grid, for reuse by the backward pass."""
    xs = np.arange(c0, c1) + 0.5
    ys = np.arange(r0, r1) + 0.5
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    px = gx.reshape(-1)
    py = gy.reshape(-1)
    dx = px[None, :] - proj.center[sel, 0][:, None]
    dy = py[None, :] - proj.center[sel, 1][:, None]
    qa = proj.conic[sel, 0][:, None]
    qb = proj.conic[sel, 1][:, None]
    qc = proj.conic[sel, 2][:, None]
    qf = qa * dx * dx + 2.0 * qb * dx * dy + qc * dy * dy
    g = np.exp(-0.5 * qf)
    a = proj.alpha[sel][:, None] * g
    a = np.where((qf <= _CUTOFF_QF) & (a >= ALPHA_FLOOR), a, 0.0)
    f = 1.0 - a
    incl = np.cumprod(f, axis=0)
    p_excl = np.empty_like(incl)
    p_excl[0] = 1.0
    p_excl[1:] = incl[:-1]
    processed = p_excl >= TRANSMITTANCE_EPS
    return a, p_excl, processed, f, dx, dy, g


def _forward_tile(proj, bg, capture_plan, rect):
    r0, r1, c0, c1 = rect
    p = (r1 - r0) * (c1 - c0)
    sel = _tile_select(proj, r0, r1, c0, c1)
    if sel.size == 0:
        rgb = np.broadcast_to(bg, (p, 3)).copy()
        t_final = np.ones(p)
        plan = np.empty((p, 0), dtype=np.int64) if capture_plan else None
        return rect, rgb, t_final, plan
    a, p_excl, processed, f, _, _, _ = _tile_blend(proj, sel, r0, r1, c0, c1)
    wgt = a * p_excl * processed
    rgb = wgt.T @ proj.color[sel]
    t_final = np.prod(np.where(processed, f, 1.0), axis=0)
    rgb += bg[None, :] * t_final[:, None]
    plan = None
    if capture_plan:
        contrib = (wgt > 0.0).T  # (P, M), m ascending = front-to-back
        counts = contrib.sum(axis=1)
        lmax = int(counts.max()) if counts.size else 0
        plan = np.full((p, lmax), -1, dtype=np.int64)
        if lmax:
            rows, cols = np.nonzero(contrib)
            starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
            slot = np.arange(rows.size) - starts[rows]
            plan[rows, slot] = proj.index[sel[cols]]
    return rect, rgb, t_final, plan


def rasterize(
    gset: GaussianSet,
    cam: Camera,
    background=(0.0, 0.0, 0.0),
    parallel: bool = False,
    capture_plan: bool = False,
):
    """Render a Gaussian set.  Returns ImageRGBA, or (ImageRGBA, BlendPlan)
    when capture_plan is set.  An empty set renders as pure background with
    alpha 0."""
    bg = _check_background(background)
    proj = ProjectedSplats(gset, cam)
    h, w = cam.height, cam.width
    rects = list(_tiles(h, w))
    if parallel and len(rects) > 1:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(lambda r: _forward_tile(proj, bg, capture_plan, r), rects))
    else:
        results = [_forward_tile(proj, bg, capture_plan, r) for r in rects]

    rgb = np.empty((h, w, 3))
    t_final = np.empty((h, w))
    tile_plans = {}
    for rect, rgb_tile, t_tile, plan in results:
        r0, r1, c0, c1 = rect
        rgb[r0:r1, c0:c1] = rgb_tile.reshape(r1 - r0, c1 - c0, 3)
        t_final[r0:r1, c0:c1] = t_tile.reshape(r1 - r0, c1 - c0)
        tile_plans[rect] = plan

    image = ImageRGBA(rgb, 1.0 - t_final)
    if not capture_plan:
        return image
    lmax = max((p.shape[1] for p in tile_plans.values()), default=0)
    ids = np.full((h, w, lmax), -1, dtype=np.int64)
    for (r0, r1, c0, c1), plan in tile_plans.items():
        if plan.shape[1]:
            ids[r0:r1, c0:c1, : plan.shape[1]] = plan.reshape(r1 - r0, c1 - c0, -1)
    return image, BlendPlan(ids)


def _project_raw(gset: GaussianSet, cam: Camera):
    """Unsorted, uncull-filtered projection arrays keyed by set index.

    Used by the frozen-plan replay, which must address splats by their
    original ids.  Culled splats keep placeholder values; a frozen plan
    never references them."""
    means = np.asarray(gset.means, dtype=np.float64)
    n = means.shape[0]
    t_cam = means @ cam.rotation.T + cam.translation
    z = t_cam[:, 2]
    z_safe = np.where(z > cam.near, z, 1.0)
    f = cam.focal
    u = f * t_cam[:, 0] / z_safe + cam.cx
    v = f * t_cam[:, 1] / z_safe + cam.cy
    sigma = gset.covariance().matrix if n else np.eye(3)
    wswt = cam.rotation @ sigma @ cam.rotation.T
    jac = np.zeros((n, 2, 3))
    jac[:, 0, 0] = f / z_safe
    jac[:, 0, 2] = -f * t_cam[:, 0] / (z_safe * z_safe)
    jac[:, 1, 1] = f / z_safe
    jac[:, 1, 2] = -f * t_cam[:, 1] / (z_safe * z_safe)
    cov2d = np.einsum("nij,jk,nlk->nil", jac, wswt, jac)
    low = cov2d.copy()
    if n:
        low[:, 0, 0] += LOWPASS
        low[:, 1, 1] += LOWPASS
    det = low[:, 0, 0] * low[:, 1, 1] - low[:, 0, 1] * low[:, 0, 1]
    inv_det = 1.0 / np.where(det > 0, det, 1.0)
    conic = np.stack([low[:, 1, 1] * inv_det, -low[:, 0, 1] * inv_det,
                      low[:, 0, 0] * inv_det], axis=1)
    return u, v, conic


def rasterize_planned(gset: GaussianSet, cam: Camera, plan: BlendPlan,
                      background=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Evaluate the blending formula on a frozen per-pixel splat plan.

    No footprint test, no contribution floor, no early termination: with
    the branch decisions frozen this is a smooth function of the Gaussian
    parameters.  At the parameters the plan was captured from it reproduces
    the normal forward.  Returns an (H,W,4) rgba array."""
    bg = _check_background(background)
    h, w = cam.height, cam.width
    ids = plan.ids
    if ids.shape[:2] != (h, w):
        raise ShapeMismatch(f"plan shape {ids.shape[:2]} does not match {(h, w)}")
    if ids.shape[2] == 0:
        out = np.empty((h, w, 4))
        out[..., :3] = bg
        out[..., 3] = 0.0
        return out
    u, v, conic = _project_raw(gset, cam)
    mask = ids >= 0
    safe = np.where(mask, ids, 0)
    px = (np.arange(w) + 0.5)[None, :, None]
    py = (np.arange(h) + 0.5)[:, None, None]
    dx = px - u[safe]
    dy = py - v[safe]
    qf = conic[safe, 0] * dx * dx + 2.0 * conic[safe, 1] * dx * dy + conic[safe, 2] * dy * dy
    alphas = np.asarray(gset.opacities, dtype=np.float64)
    a = np.where(mask, alphas[safe] * np.exp(-0.5 * qf), 0.0)
    f = 1.0 - a
    incl = np.cumprod(f, axis=2)
    p_excl = np.empty_like(incl)
    p_excl[..., 0] = 1.0
    p_excl[..., 1:] = incl[..., :-1]
    wgt = a * p_excl
    colors = np.asarray(gset.colors, dtype=np.float64)
    rgb = np.einsum("hwl,hwlc->hwc", wgt, colors[safe])
    t_final = incl[..., -1]
    rgb += bg[None, None, :] * t_final[..., None]
    out = np.empty((h, w, 4))
    out[..., :3] = rgb
    out[..., 3] = 1.0 - t_final
    return out
