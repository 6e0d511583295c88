"""Analytic gradients of the rasterizer.

Recomputes the forward tile by tile (nothing is cached between passes) and
chains the upstream (H,W,4) gradient through the blending recurrence, the
screen-space kernel, the conic inverse, and the projection Jacobian back to
per-Gaussian means, colors, and opacities.

Per pixel, with a_i the blend weight of the i-th processed splat, exclusive
transmittance P_i and final transmittance T:

    dL/dc_i = g_rgb a_i P_i
    dL/da_i = (c_i . g_rgb) P_i  -  S_i / (1 - a_i)  -  u T / (1 - a_i)

where S_i = sum_{k>i} (c_k . g_rgb) a_k P_k collects the occlusion of later
splats and u = g_rgb . background - g_alpha is the sensitivity to T (alpha
= 1 - T and the background enters as bg * T).  Splats skipped by the
footprint/floor/early-stop rules are outside the differentiated branch and
receive zero gradient, matching the frozen-plan finite-difference view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..cameras import Camera
from ..errors import NonFiniteInput, ShapeMismatch
from ..gaussians import GaussianSet
from .project import ProjectedSplats
from .raster import _check_background, _tile_blend, _tile_select, _tiles


@dataclass(frozen=True)
class RenderGradients:
    """Per-Gaussian loss gradients; zero rows for culled Gaussians."""

    d_means: np.ndarray
    d_colors: np.ndarray
    d_opacities: np.ndarray


def rasterize_backward(
    gset: GaussianSet,
    cam: Camera,
    upstream: np.ndarray,
    background=(0.0, 0.0, 0.0),
) -> RenderGradients:
    """Chain an upstream d(loss)/d(rgba) image back to Gaussian attributes."""
    bg = _check_background(background)
    upstream = np.asarray(upstream, dtype=np.float64)
    h, w = cam.height, cam.width
    if upstream.shape != (h, w, 4):
        raise ShapeMismatch(f"upstream must be ({h},{w},4), got {upstream.shape}")
    if not np.all(np.isfinite(upstream)):
        raise NonFiniteInput("upstream gradient contains NaN/Inf")

    proj = ProjectedSplats(gset, cam)
    n = proj.n_total
    m = len(proj)
    d_means = np.zeros((n, 3))
    d_colors = np.zeros((n, 3))
    d_opac = np.zeros(n)
    if m == 0:
        return RenderGradients(d_means, d_colors, d_opac)

    # accumulators in sorted-splat space
    acc_center = np.zeros((m, 2))
    acc_conic = np.zeros((m, 3))  # packed (A, B, C): qf = A dx^2 + 2B dxdy + C dy^2
    acc_alpha = np.zeros(m)
    acc_color = np.zeros((m, 3))

    for r0, r1, c0, c1 in _tiles(h, w):
        sel = _tile_select(proj, r0, r1, c0, c1)
        if sel.size == 0:
            continue
        a, p_excl, processed, f, dx, dy, g = _tile_blend(proj, sel, r0, r1, c0, c1)
        g_rgb = upstream[r0:r1, c0:c1, :3].reshape(-1, 3)
        g_a = upstream[r0:r1, c0:c1, 3].reshape(-1)

        wgt = a * p_excl * processed
        acc_color[sel] += wgt @ g_rgb

        cdotg = proj.color[sel] @ g_rgb.T  # (M, P)
        term = cdotg * wgt
        suffix = np.flip(np.cumsum(np.flip(term, axis=0), axis=0), axis=0) - term
        t_final = np.prod(np.where(processed, f, 1.0), axis=0)
        u_pix = g_rgb @ bg - g_a  # dL/dT per pixel

        active = (a > 0.0) & processed
        denom = np.maximum(f, 1e-12)
        da = np.where(
            active,
            cdotg * p_excl - suffix / denom - (u_pix * t_final)[None, :] / denom,
            0.0,
        )

        acc_alpha[sel] += (g * da).sum(axis=1)
        gq = -0.5 * g * (proj.alpha[sel][:, None] * da)  # dL/d(quadratic form)
        qa = proj.conic[sel, 0][:, None]
        qb = proj.conic[sel, 1][:, None]
        qc = proj.conic[sel, 2][:, None]
        ddx = gq * (2.0 * qa * dx + 2.0 * qb * dy)
        ddy = gq * (2.0 * qc * dy + 2.0 * qb * dx)
        acc_center[sel, 0] += -ddx.sum(axis=1)
        acc_center[sel, 1] += -ddy.sum(axis=1)
        acc_conic[sel, 0] += (gq * dx * dx).sum(axis=1)
        acc_conic[sel, 1] += (gq * 2.0 * dx * dy).sum(axis=1)
        acc_conic[sel, 2] += (gq * dy * dy).sum(axis=1)

    # conic -> low-passed covariance: Lambda = M^-1, dM = -Lambda gLam Lambda
    lam = np.empty((m, 2, 2))
    lam[:, 0, 0] = proj.conic[:, 0]
    lam[:, 0, 1] = lam[:, 1, 0] = proj.conic[:, 1]
    lam[:, 1, 1] = proj.conic[:, 2]
    g_lam = np.empty((m, 2, 2))
    g_lam[:, 0, 0] = acc_conic[:, 0]
    g_lam[:, 0, 1] = g_lam[:, 1, 0] = 0.5 * acc_conic[:, 1]
    g_lam[:, 1, 1] = acc_conic[:, 2]
    g_cov = -np.einsum("nij,njk,nkl->nil", lam, g_lam, lam)

    # cov2d = J V J^T with V the world covariance in the camera frame
    sigma = gset.covariance().matrix
    v_cam = cam.rotation @ sigma @ cam.rotation.T
    x = proj.t_cam[:, 0]
    y = proj.t_cam[:, 1]
    z = proj.t_cam[:, 2]
    fl = cam.focal
    jac = np.zeros((m, 2, 3))
    jac[:, 0, 0] = fl / z
    jac[:, 0, 2] = -fl * x / (z * z)
    jac[:, 1, 1] = fl / z
    jac[:, 1, 2] = -fl * y / (z * z)
    g_sym = g_cov + np.swapaxes(g_cov, 1, 2)
    g_jac = np.einsum("nij,njk,kl->nil", g_sym, jac, v_cam)

    # center path: d(u,v)/d(t_cam) is exactly J
    d_tcam = np.einsum("nij,ni->nj", jac, acc_center)
    # J's own dependence on t_cam
    fz2 = fl / (z * z)
    fz3 = 2.0 * fl / (z * z * z)
    d_tcam[:, 0] += g_jac[:, 0, 2] * (-fz2)
    d_tcam[:, 1] += g_jac[:, 1, 2] * (-fz2)
    d_tcam[:, 2] += (
        g_jac[:, 0, 0] * (-fz2)
        + g_jac[:, 1, 1] * (-fz2)
        + g_jac[:, 0, 2] * (fz3 * x)
        + g_jac[:, 1, 2] * (fz3 * y)
    )

    d_means_sorted = d_tcam @ cam.rotation
    np.add.at(d_means, proj.index, d_means_sorted)
    np.add.at(d_colors, proj.index, acc_color)
    np.add.at(d_opac, proj.index, acc_alpha)
    return RenderGradients(d_means, d_colors, d_opac)
