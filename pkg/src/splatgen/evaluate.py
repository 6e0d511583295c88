"""Held-out evaluation: image metrics on novel views, plus silhouette IoU.

Variants:
- "full": coarse + SR output (the model's actual product);
- "no_sr": the same checkpoint's coarse output rendered directly;
- "no_texture_field": a checkpoint trained with the texture field
  disabled (direct color/opacity head), coarse output.

The perceptual column is the fixed-convolution proxy, not a pretrained
metric, and is labeled "perceptual_proxy" wherever it is printed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import ConfigError, ShapeMismatch
from .losses import perceptual_proxy, psnr
from .render import rasterize
from .synth import generate_synthetic_object, render_views
from .train import (
    coarse_scale_of,
    fine_scale_of,
    holdout_object_seeds,
    load_models,
    pool_cameras,
)

VARIANTS = ("full", "no_sr", "no_texture_field")


def ssim(a: np.ndarray, b: np.ndarray, window: int = 7,
         c1: float = 0.01**2, c2: float = 0.03**2) -> float:
    """Mean structural similarity of two [0,1] images; rgb is averaged
    channel-wise with a uniform window."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"ssim shapes {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    vals = []
    for ch in range(a.shape[2]):
        x, y = a[:, :, ch], b[:, :, ch]
        mx = uniform_filter(x, window)
        my = uniform_filter(y, window)
        vx = uniform_filter(x * x, window) - mx * mx
        vy = uniform_filter(y * y, window) - my * my
        cxy = uniform_filter(x * y, window) - mx * my
        s = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2))
        vals.append(float(s.mean()))
    return float(np.mean(vals))


def silhouette_iou(alpha_pred: np.ndarray, alpha_gt: np.ndarray,
                   threshold: float = 0.5) -> float:
    p = np.asarray(alpha_pred) > threshold
    g = np.asarray(alpha_gt) > threshold
    union = float(np.logical_or(p, g).sum())
    if union == 0:
        return 1.0
    return float(np.logical_and(p, g).sum()) / union


def _predict_set(cfg, gen, sr, input_rgb: np.ndarray, variant: str):
    if variant == "full":
        coarse_out, feats = gen.forward(input_rgb, return_features=True)
        fine = sr.forward(coarse_out, feats, coarse_scale_of(cfg))
        return fine.to_set(fine_scale_of(cfg))
    if variant in ("no_sr", "no_texture_field"):
        out = gen.forward(input_rgb)
        return out.to_set(coarse_scale_of(cfg))
    raise ConfigError(f"unknown variant {variant!r} (expected one of {VARIANTS})")


def evaluate(checkpoint, variant: str = "full", object_seeds=None,
             n_views: int = 6, verbose: bool = False) -> dict:
    """Mean metrics over held-out objects' novel views.

    Returns {"psnr", "ssim", "l1", "perceptual_proxy", "iou", "n_views",
    "variant"}; novel views never include the input view.
    """
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r} (expected one of {VARIANTS})")
    cfg, _, _, gen, sr, _ = load_models(checkpoint)
    if variant == "no_texture_field" and cfg.texture_field:
        raise ConfigError("no_texture_field evaluation needs a checkpoint trained "
                          "with texture_field disabled")
    seeds = list(object_seeds) if object_seeds is not None else holdout_object_seeds(cfg)
    rows = {"psnr": [], "ssim": [], "l1": [], "perceptual_proxy": [], "iou": []}
    for seed in seeds:
        obj = generate_synthetic_object(seed)
        input_cam, sup = pool_cameras(cfg, seed)
        input_view = render_views(obj, [input_cam])[0]
        pred = _predict_set(cfg, gen, sr, input_view.rgb, variant)
        cams = sup[:n_views]
        gts = render_views(obj, cams)
        for cam, gt in zip(cams, gts):
            out = rasterize(pred, cam)
            rows["psnr"].append(psnr(out.rgb, gt.rgb))
            rows["ssim"].append(ssim(out.rgb, gt.rgb))
            rows["l1"].append(float(np.abs(out.as_array() - gt.as_array()).mean()))
            rows["perceptual_proxy"].append(perceptual_proxy(out.rgb, gt.rgb).data.item())
            rows["iou"].append(silhouette_iou(out.alpha, gt.alpha))
        if verbose:
            print(f"{obj.object_id}: psnr={np.mean(rows['psnr'][-len(cams):]):.2f} "
                  f"iou={np.mean(rows['iou'][-len(cams):]):.3f}")
    result = {k: float(np.mean(v)) for k, v in rows.items()}
    result["n_views"] = len(rows["psnr"])
    result["variant"] = variant
    return result
