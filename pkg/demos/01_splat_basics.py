"""Hand-built Gaussians through the rasterizer: occlusion, alpha, background.

Run:  python3 demos/01_splat_basics.py
Writes renders to demo_out/01_splats/.
"""

from pathlib import Path

import numpy as np

from splatgen import GaussianSet, orbit, rasterize

OUT = Path("demo_out/01_splats")


def main():
    OUT.mkdir(parents=True, exist_ok=True)

    # three overlapping splats: red in front, green mid, blue behind
    gset = GaussianSet(
        means=np.array([[0.0, 0.0, 0.35], [0.12, 0.0, 0.0], [0.24, 0.0, -0.35]]),
        colors=np.array([[0.9, 0.15, 0.1], [0.1, 0.8, 0.2], [0.15, 0.2, 0.9]]),
        opacities=np.array([0.85, 0.85, 0.85]),
        scale=0.18,
    )

    front = orbit(azimuth=0.0, elevation=0.0, radius=2.2, width=128, height=128)
    img = rasterize(gset, front)
    img.save_png(OUT / "front.png")
    print(f"front view: rgb in [{img.rgb.min():.3f}, {img.rgb.max():.3f}], "
          f"peak alpha {img.alpha.max():.3f}")

    # walk the camera around: ordering flips as depth order changes
    for az in (60, 120, 180):
        cam = orbit(float(az), 0.0, 2.2, 128, 128)
        rasterize(gset, cam).save_png(OUT / f"orbit_{az:03d}.png")
    print("wrote orbit_060/120/180.png (watch red and blue swap)")

    # background only blends where splats leave transmittance
    white = rasterize(gset, front, background=np.array([1.0, 1.0, 1.0]))
    same_alpha = np.array_equal(white.alpha, img.alpha)
    print(f"white background: alpha unchanged = {same_alpha}, "
          f"rgb differs by (1 - alpha) * bg")

    # opacity drives coverage, not color
    faint = GaussianSet(means=gset.means, colors=gset.colors,
                        opacities=np.full(3, 0.2), scale=0.18)
    faint_img = rasterize(faint, front)
    print(f"opacity 0.85 -> 0.20 drops peak alpha "
          f"{img.alpha.max():.3f} -> {faint_img.alpha.max():.3f}")
    print(f"outputs in {OUT}/")


if __name__ == "__main__":
    main()
