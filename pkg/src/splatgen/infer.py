"""Single-image inference: two forward passes, no optimization, no pose.

Loads a trained checkpoint, encodes the image once, runs the coarse
generator and the SR module, and writes a PLY plus turntable renders.
The wall clock is reported split by stage; the forward-pass counters and
the Adam-call audit counter let tests pin the amortization contract.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cameras import orbit
from .coarse import GaussianTensors
from .errors import ShapeMismatch
from .gaussians import GaussianSet
from .ply_io import export_ply
from .render import rasterize
from .render.image import ImageRGBA, load_png
from .synth import DEFAULT_RADIUS, INPUT_ELEVATION
from .train import coarse_scale_of, fine_scale_of, load_models


@dataclass
class InferResult:
    gaussians: GaussianSet
    ply_path: Path | None
    turntable_paths: list
    timings: dict  # seconds: coarse, sr, render, total
    forward_passes: int
    adam_calls: int


def _load_input_rgb(image, input_res: int) -> np.ndarray:
    if isinstance(image, (str, Path)):
        img = load_png(image)
        rgb = img.rgb
    elif isinstance(image, ImageRGBA):
        rgb = image.rgb
    else:
        rgb = np.asarray(image, dtype=np.float64)
        if rgb.ndim == 3 and rgb.shape[2] == 4:
            rgb = rgb[:, :, 0:3]
    if rgb.shape != (input_res, input_res, 3):
        raise ShapeMismatch(
            f"input image must be ({input_res},{input_res},3), got {rgb.shape}"
        )
    return rgb


def infer(checkpoint, image, out_dir=None, turntable: int = 8,
          turntable_elevation: float = INPUT_ELEVATION,
          radius: float = DEFAULT_RADIUS, render_res: int | None = None) -> InferResult:
    """image (path, ImageRGBA, or array) + checkpoint -> fine GaussianSet.

    No camera pose is taken or used; the output lives in the input view's
    azimuth-normalized frame.
    """
    cfg, coarse_store, sr_store, gen, sr, _ = load_models(checkpoint)
    rgb = _load_input_rgb(image, cfg.input_res)
    adam_before = coarse_store.adam_calls + sr_store.adam_calls
    fwd_before = gen.forward_calls + sr.forward_calls

    t0 = time.perf_counter()
    coarse_out, feats = gen.forward(rgb, return_features=True)
    t1 = time.perf_counter()
    fine: GaussianTensors = sr.forward(coarse_out, feats, coarse_scale_of(cfg))
    t2 = time.perf_counter()
    gset = fine.to_set(fine_scale_of(cfg))

    ply_path = None
    paths = []
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        ply_path = out_dir / "gaussians.ply"
        export_ply(gset, ply_path)
        res = render_res or cfg.render_res
        for k in range(turntable):
            cam = orbit(360.0 * k / max(turntable, 1), turntable_elevation, radius, res, res)
            img = rasterize(gset, cam)
            p = out_dir / f"turntable_{k:02d}.png"
            img.save_png(p)
            paths.append(p)
    t3 = time.perf_counter()

    return InferResult(
        gaussians=gset,
        ply_path=ply_path,
        turntable_paths=paths,
        timings={"coarse": t1 - t0, "sr": t2 - t1, "render": t3 - t2, "total": t3 - t0},
        forward_passes=(gen.forward_calls + sr.forward_calls) - fwd_before,
        adam_calls=(coarse_store.adam_calls + sr_store.adam_calls) - adam_before,
    )
