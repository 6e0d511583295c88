"""Finite-difference validation of the rasterizer's analytic backward.

The forward is piecewise smooth (footprint cutoff, contribution floor,
early termination are step rules), so raw central differences straddling a
branch boundary would disagree with any consistent gradient.  The check
therefore freezes the per-pixel blend plan captured at the base point and
differences the smooth frozen-plan evaluation; the analytic backward
differentiates exactly that branch.  A replay-equals-forward assertion at
the base point guards the plan capture itself.
"""

from __future__ import annotations

import numpy as np

from ..cameras import Camera, orbit
from ..gaussians import GaussianSet
from .backward import rasterize_backward
from .raster import rasterize, rasterize_planned

REL_TOL = 1e-3
MAG_FLOOR = 1e-6


def random_scene(seed: int, n_gaussians: int | None = None, width: int = 32,
                 height: int = 32) -> tuple[GaussianSet, Camera, np.ndarray]:
    """Deterministic random scene: set, camera, and an upstream gradient.

    Attributes stay inside their valid ranges with margin > the FD step so
    perturbed sets remain constructible.
    """
    rng = np.random.default_rng(seed)
    if n_gaussians is None:
        n_gaussians = int(rng.integers(4, 25))
    if not (1 <= n_gaussians <= 64):
        raise ValueError("gradcheck scenes use 1..64 Gaussians")
    means = rng.uniform(-0.6, 0.6, size=(n_gaussians, 3))
    colors = rng.uniform(0.05, 0.95, size=(n_gaussians, 3))
    opac = rng.uniform(0.15, 0.9, size=n_gaussians)
    scale = float(rng.uniform(0.08, 0.2))
    gset = GaussianSet(means, colors, opac, scale)
    cam = orbit(
        azimuth_deg=float(rng.uniform(0, 360)),
        elevation_deg=float(rng.uniform(-45, 45)),
        radius=2.4,
        width=width,
        height=height,
    )
    upstream = rng.uniform(-1.0, 1.0, size=(height, width, 4))
    return gset, cam, upstream


def gradcheck(seed: int = 0, n_gaussians: int | None = None, width: int = 32,
              height: int = 32, h: float = 1e-4, background=(0.0, 0.0, 0.0),
              backward_fn=rasterize_backward) -> dict:
    """Check analytic vs frozen-plan FD gradients on one random scene.

    Returns a report dict; report["pass"] requires relative error < 1e-3 on
    every gradient entry with magnitude > 1e-6, plus base-point replay
    consistency.  Deterministic given the seed.
    """
    if width > 64 or height > 64:
        raise ValueError("gradcheck images are capped at 64x64")
    gset, cam, upstream = random_scene(seed, n_gaussians, width, height)
    image, plan = rasterize(gset, cam, background, capture_plan=True)
    base = rasterize_planned(gset, cam, plan, background)
    replay_err = float(np.abs(base - image.as_array()).max())

    grads = backward_fn(gset, cam, upstream, background)
    analytic = {
        "means": grads.d_means,
        "colors": grads.d_colors,
        "opacities": grads.d_opacities,
    }

    def loss_of(means, colors, opac) -> float:
        probe = GaussianSet(means, colors, opac, gset.scale, gset.rotation)
        rgba = rasterize_planned(probe, cam, plan, background)
        return float((upstream * rgba).sum())

    arrays = {
        "means": np.array(gset.means),
        "colors": np.array(gset.colors),
        "opacities": np.array(gset.opacities),
    }
    report_attrs = {}
    worst = 0.0
    checked = 0
    for attr in arrays:
        fd = np.zeros_like(arrays[attr])
        flat = fd.reshape(-1)
        base_arr = arrays[attr].reshape(-1)
        for k in range(base_arr.size):
            orig = base_arr[k]
            base_arr[k] = orig + h
            lp = loss_of(arrays["means"], arrays["colors"], arrays["opacities"])
            base_arr[k] = orig - h
            lm = loss_of(arrays["means"], arrays["colors"], arrays["opacities"])
            base_arr[k] = orig
            flat[k] = (lp - lm) / (2.0 * h)
        ana = analytic[attr]
        mag = np.maximum(np.abs(ana), np.abs(fd))
        consider = mag > MAG_FLOOR
        rel = np.zeros_like(mag)
        rel[consider] = np.abs(ana - fd)[consider] / mag[consider]
        attr_max = float(rel.max()) if rel.size else 0.0
        report_attrs[attr] = {
            "max_rel_err": attr_max,
            "n_checked": int(consider.sum()),
        }
        worst = max(worst, attr_max)
        checked += int(consider.sum())

    ok = worst < REL_TOL and replay_err < 1e-9
    return {
        "pass": bool(ok),
        "seed": seed,
        "n_gaussians": len(gset),
        "max_rel_err": worst,
        "replay_err": replay_err,
        "n_checked": checked,
        "attributes": report_attrs,
    }
