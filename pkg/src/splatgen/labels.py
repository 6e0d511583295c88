"""Per-object pseudo-label fitting and the label cache.

A pseudo label is a GaussianSet fitted to posed views of one object by
Adam on the rendering loss, with canonical scale/rotation and a fixed
count (no splitting or pruning).  Labels are only warmup targets for the
generator, not unique ground truth.

Cache layout: <dir>/<id>.ply plus <dir>/manifest.json holding the fitting
diagnostics per object id.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .cameras import Camera
from .errors import ShapeMismatch
from .gaussians import GaussianSet, canonical_scale
from .losses import LossWeights, psnr, rendering_loss
from .nn import ParamStore
from .ply_io import export_ply, import_ply
from .render import render_tensor
from .render.image import ImageRGBA


@dataclass
class FitReport:
    iterations: int
    initial_loss: float
    final_loss: float
    initial_psnr: float
    final_psnr: float
    converged: bool
    reason: str  # "plateau" or "max_iters"


def _logit(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 1e-5, 1.0 - 1e-5)
    return np.log(p / (1.0 - p))


def fit_pseudo_label(
    views: list[tuple[Camera, ImageRGBA]],
    init_means: np.ndarray,
    *,
    init_colors: np.ndarray | None = None,
    init_opacity: float = 0.5,
    scale: float | None = None,
    rotation=(1.0, 0.0, 0.0, 0.0),
    max_iters: int = 2000,
    lr: float = 0.02,
    weights: LossWeights | None = None,
    plateau_rel: float = 1e-4,
    plateau_window: int = 50,
) -> tuple[GaussianSet, FitReport]:
    """Fit means/colors/opacities of a fixed-size set to posed rgba views.

    Colors and opacities are optimized through logits so they stay in
    (0,1); means are re-projected into [-1,1]^3 after each step.  Stops on
    a loss plateau (relative improvement < plateau_rel over plateau_window
    iterations) or at max_iters; non-convergence is reported in the
    returned diagnostics, never raised.
    """
    if len(views) < 4:
        raise ValueError(f"need at least 4 posed views, got {len(views)}")
    init_means = np.asarray(init_means, dtype=np.float64)
    if init_means.ndim != 2 or init_means.shape[1] != 3:
        raise ShapeMismatch(f"init_means must be (N,3), got {init_means.shape}")
    n = init_means.shape[0]
    if scale is None:
        scale = canonical_scale(n)
    if init_colors is None:
        init_colors = np.full((n, 3), 0.5)
    weights = weights or LossWeights()

    store = ParamStore(dtype=np.float64)
    means = store.add("means", np.clip(init_means, -1.0, 1.0))
    color_logits = store.add("color_logits", _logit(np.asarray(init_colors, dtype=np.float64)))
    opacity_logits = store.add("opacity_logits", np.full(n, float(_logit(np.array(init_opacity)))))
    rotation = np.asarray(rotation, dtype=np.float64)

    from . import nn  # local import to keep module load light

    def current_set() -> GaussianSet:
        return GaussianSet(
            np.clip(means.data, -1.0, 1.0),
            1.0 / (1.0 + np.exp(-color_logits.data)),
            1.0 / (1.0 + np.exp(-opacity_logits.data)),
            scale,
            rotation,
        )

    def views_psnr() -> float:
        s = current_set()
        vals = []
        from .render import rasterize
        for cam, img in views:
            vals.append(psnr(rasterize(s, cam).rgb, img.rgb))
        return float(np.mean(vals))

    def iteration_loss():
        colors = nn.sigmoid(color_logits)
        opac = nn.sigmoid(opacity_logits)
        total = None
        for cam, img in views:
            out = render_tensor(means, colors, opac, scale, cam, rotation=rotation)
            term = rendering_loss(out, img.as_array(), weights)
            total = term if total is None else total + term
        return total / float(len(views))

    initial_psnr = views_psnr()
    history: list[float] = []
    initial_loss = None
    reason = "max_iters"
    it = 0
    for it in range(1, max_iters + 1):
        loss = iteration_loss()
        val = loss.data.item()
        if initial_loss is None:
            initial_loss = val
        history.append(val)
        loss.backward()
        store.adam_step(lr)
        store.zero_grad()
        np.clip(means.data, -1.0, 1.0, out=means.data)
        if len(history) > plateau_window:
            prev = history[-1 - plateau_window]
            if prev > 0 and (prev - val) / prev < plateau_rel:
                reason = "plateau"
                break

    final = current_set()
    report = FitReport(
        iterations=it,
        initial_loss=float(initial_loss),
        final_loss=float(history[-1]),
        initial_psnr=float(initial_psnr),
        final_psnr=float(views_psnr()),
        converged=(reason == "plateau"),
        reason=reason,
    )
    return final, report


# -- cache -------------------------------------------------------------------

def label_path(cache_dir, object_id: str) -> Path:
    return Path(cache_dir) / f"{object_id}.ply"


def _manifest_path(cache_dir) -> Path:
    return Path(cache_dir) / "manifest.json"


def write_label(cache_dir, object_id: str, label: GaussianSet, report: FitReport) -> None:
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    export_ply(label, label_path(cache_dir, object_id))
    path = _manifest_path(cache_dir)
    manifest = json.loads(path.read_text()) if path.exists() else {}
    manifest[object_id] = asdict(report)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))


def read_label(cache_dir, object_id: str) -> GaussianSet:
    return import_ply(label_path(cache_dir, object_id))


def has_label(cache_dir, object_id: str) -> bool:
    return label_path(cache_dir, object_id).exists()


def read_manifest(cache_dir) -> dict:
    path = _manifest_path(cache_dir)
    return json.loads(path.read_text()) if path.exists() else {}
