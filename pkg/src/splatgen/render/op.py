"""Autodiff bridge: the rasterizer as a custom op on the tape."""

from __future__ import annotations

import numpy as np

from ..cameras import Camera
from ..gaussians import GaussianSet
from ..nn.tensor import Tensor, as_tensor, custom_op
from .backward import rasterize_backward
from .raster import rasterize


def render_tensor(means, colors, opacities, scale: float, cam: Camera,
                  rotation=(1.0, 0.0, 0.0, 0.0),
                  background=(0.0, 0.0, 0.0)) -> Tensor:
    """Differentiable render: (N,3),(N,3),(N,) tensors -> (H,W,4) rgba Tensor.

    Gradients reach means, colors, and opacities through the analytic
    backward; scale and rotation are shared constants of the set.
    """
    means, colors, opacities = as_tensor(means), as_tensor(colors), as_tensor(opacities)
    gset = GaussianSet(
        np.clip(means.data, -1.0, 1.0),
        np.clip(colors.data, 0.0, 1.0),
        np.clip(opacities.data, 0.0, 1.0),
        scale,
        np.asarray(rotation, dtype=np.float64),
    )
    image = rasterize(gset, cam, background)
    rgba = image.as_array()

    def vjp(g):
        grads = rasterize_backward(gset, cam, g, background)
        return grads.d_means, grads.d_colors, grads.d_opacities

    return custom_op(rgba, (means, colors, opacities), vjp)
