"""Pseudo-label fitting: optimize a Gaussian set to match rendered views.

Run:  python3 demos/03_fit_labels.py
Writes before/after renders to demo_out/03_labels/.
"""

from pathlib import Path

import numpy as np

from splatgen import fit_pseudo_label, generate_synthetic_object, rasterize, render_views
from splatgen.gaussians import canonical_scale
from splatgen.synth import dense_gaussians, sample_cameras

OUT = Path("demo_out/03_labels")
N = 128


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    obj = generate_synthetic_object(3)
    cams = sample_cameras(8, seed=3, width=64, height=64)
    views = render_views(obj, cams)

    # init: surface samples with their colors, jittered so the fit has work to do
    rng = np.random.default_rng(0)
    pick = rng.choice(obj.surface_points.shape[0], size=N, replace=False)
    init_mu = obj.surface_points[pick] + rng.normal(0, 0.05, (N, 3))
    init_col = np.clip(obj.surface_colors[pick] + rng.normal(0, 0.2, (N, 3)), 0, 1)

    scale = canonical_scale(N)
    before = dense_gaussians(obj)  # ground truth look, for reference
    rasterize(before, cams[0]).save_png(OUT / "target.png")

    label, report = fit_pseudo_label(
        list(zip(cams, views)), init_mu, init_colors=init_col,
        scale=scale, max_iters=250,
    )
    print(f"fit: {report.iterations} iters, "
          f"psnr {report.initial_psnr:.2f} -> {report.final_psnr:.2f} dB, "
          f"stopped on {report.reason}")

    rasterize(label, cams[0]).save_png(OUT / "fitted.png")
    print(f"wrote {OUT}/target.png and {OUT}/fitted.png "
          f"({len(label)} Gaussians, scale {scale})")


if __name__ == "__main__":
    main()
