"""Perspective projection of 3D Gaussians to screen-space splats.

Each Gaussian projects to a 2D mean (pinhole) and a 2D covariance via the
local affine (EWA) approximation cov2d = J W Sigma W^T J^T, where W is the
camera rotation and J the Jacobian of the perspective map at the point.
Splat2D.cov2d stores that raw projection; the 0.3-pixel low-pass is added
when forming the blending conic and the 3-sigma radius, which keeps every
splat at least a fraction of a pixel wide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..cameras import Camera
from ..errors import NonFiniteInput
from ..gaussians import GaussianSet

LOWPASS = 0.3  # pixels^2, added to the diagonal of cov2d before inversion
CUTOFF_SIGMA = 3.0
ALPHA_FLOOR = 1.0 / 255.0  # contributions below this are skipped
TRANSMITTANCE_EPS = 1e-4  # blending stops once transmittance drops below


@dataclass(frozen=True)
class Splat2D:
    """One projected Gaussian: screen center, raw 2x2 covariance, depth,
    color, opacity, and the conservative pixel radius (3 sigma of the
    low-passed covariance)."""

    center: np.ndarray
    cov2d: np.ndarray
    depth: float
    color: np.ndarray
    opacity: float
    radius: float


class ProjectedSplats:
    """Struct-of-arrays projection of a whole set, depth-sorted.

    Culled Gaussians (depth <= near, or 3-sigma box outside the frame) are
    excluded from `order`; `index` maps sorted slots back to set indices.
    """

    __slots__ = (
        "center", "cov2d", "conic", "depth", "radius", "color", "alpha",
        "t_cam", "index", "n_total",
    )

    def __init__(self, gset: GaussianSet, cam: Camera):
        means = np.asarray(gset.means, dtype=np.float64)
        if not np.all(np.isfinite(means)):
            raise NonFiniteInput("means contain NaN/Inf")
        n = means.shape[0]
        self.n_total = n
        t_cam = means @ cam.rotation.T + cam.translation
        z = t_cam[:, 2]
        in_front = z > cam.near

        # avoid div-by-zero for culled points; they are masked out below
        z_safe = np.where(in_front, z, 1.0)
        f = cam.focal
        u = f * t_cam[:, 0] / z_safe + cam.cx
        v = f * t_cam[:, 1] / z_safe + cam.cy

        sigma = gset.covariance().matrix
        w_sigma_wt = cam.rotation @ sigma @ cam.rotation.T  # world cov in cam frame
        x, y = t_cam[:, 0], t_cam[:, 1]
        fz = f / z_safe
        fz2 = f / (z_safe * z_safe)
        # J rows per splat: [[f/z, 0, -f x/z^2], [0, f/z, -f y/z^2]]
        jac = np.zeros((n, 2, 3))
        jac[:, 0, 0] = fz
        jac[:, 0, 2] = -fz2 * x
        jac[:, 1, 1] = fz
        jac[:, 1, 2] = -fz2 * y
        cov2d = np.einsum("nij,jk,nlk->nil", jac, w_sigma_wt, jac)

        low = cov2d.copy()
        low[:, 0, 0] += LOWPASS
        low[:, 1, 1] += LOWPASS
        a = low[:, 0, 0]
        b = low[:, 0, 1]
        c = low[:, 1, 1]
        tr = a + c
        disc = np.sqrt(np.maximum(0.25 * tr * tr - (a * c - b * b), 0.0))
        lam_max = 0.5 * tr + disc
        radius = CUTOFF_SIGMA * np.sqrt(np.maximum(lam_max, 0.0))

        det = a * c - b * b
        inv_det = 1.0 / np.where(det > 0, det, 1.0)
        conic = np.stack([c * inv_det, -b * inv_det, a * inv_det], axis=1)  # (A,B,C)

        visible = (
            in_front
            & (det > 0)
            & (u + radius > 0.0)
            & (u - radius < cam.width)
            & (v + radius > 0.0)
            & (v - radius < cam.height)
        )
        keep = np.nonzero(visible)[0]
        depth = z[keep]
        # front-to-back, ties broken by original index (lexsort: last key primary)
        order = np.lexsort((keep, depth))
        sel = keep[order]

        self.center = np.stack([u[sel], v[sel]], axis=1)
        self.cov2d = cov2d[sel]
        self.conic = conic[sel]
        self.depth = z[sel]
        self.radius = radius[sel]
        self.color = np.asarray(gset.colors, dtype=np.float64)[sel]
        self.alpha = np.asarray(gset.opacities, dtype=np.float64)[sel]
        self.t_cam = t_cam[sel]
        self.index = sel

    def __len__(self) -> int:
        return self.index.shape[0]


def project_gaussian(gset: GaussianSet, index: int, cam: Camera) -> Splat2D | None:
    """Project one Gaussian of the set; None when culled.

    Culled means depth <= near or the 3-sigma disk misses the frame.
    """
    proj = ProjectedSplats(gset, cam)
    slot = np.nonzero(proj.index == index)[0]
    if slot.size == 0:
        return None
    s = int(slot[0])
    return Splat2D(
        center=proj.center[s].copy(),
        cov2d=proj.cov2d[s].copy(),
        depth=float(proj.depth[s]),
        color=proj.color[s].copy(),
        opacity=float(proj.alpha[s]),
        radius=float(proj.radius[s]),
    )
