"""Anatomy of the coarse generator: one image in, a Gaussian set out.

Untrained weights, so the output is a centered blob; the point is the
data flow: patch tokens -> learned queries -> locations, and a triplane
texture field scoring colors/opacities at those locations.

Run:  python3 demos/04_coarse_generator.py
"""

import numpy as np

from splatgen import CoarseGenerator, generate_synthetic_object, rasterize, render_views
from splatgen.gaussians import canonical_scale
from splatgen.nn import ParamStore
from splatgen.synth import sample_cameras


def main():
    rng = np.random.default_rng(0)
    store = ParamStore()
    gen = CoarseGenerator(
        store, rng,
        image_size=64, patch_size=8, dim=64, heads=2,
        encoder_blocks=2, geometry_blocks=1, texture_blocks=1,
        n_gaussians=64, plane_res=16, plane_feat=8, plane_patch=4,
        decode_hidden=32,
    )
    n_params = sum(t.data.size for t in store.tensors())
    print(f"generator: {n_params:,} parameters in {len(store.tensors())} tensors")

    obj = generate_synthetic_object(0)
    cam = sample_cameras(1, seed=0, width=64, height=64)[0]
    view = render_views(obj, [cam])[0]

    out = gen.forward(view.rgb)
    mu = out.means.data
    print(f"means:      {mu.shape}, range [{mu.min():+.3f}, {mu.max():+.3f}] "
          f"(tanh keeps them in the unit box)")
    print(f"colors:     {out.colors.data.shape}, "
          f"range [{out.colors.data.min():.3f}, {out.colors.data.max():.3f}]")
    print(f"opacities:  {out.opacities.data.shape}, "
          f"range [{out.opacities.data.min():.3f}, {out.opacities.data.max():.3f}]")

    gset = out.to_set(canonical_scale(64))
    img = rasterize(gset, cam)
    print(f"untrained render: peak alpha {img.alpha.max():.3f} "
          f"(a blob near the origin; training moves it onto the object)")

    # the texture field is queried at the predicted locations, so moving a
    # point moves the color it picks up
    triplane = gen.generate_triplane(gen.encode_image(view.rgb))
    print(f"triplane planes: {triplane.xy.data.shape} each (xy, xz, yz)")


if __name__ == "__main__":
    main()
