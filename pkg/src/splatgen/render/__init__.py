"""Differentiable tile-based Gaussian splat renderer."""

from .backward import RenderGradients, rasterize_backward
from .gradcheck import gradcheck, random_scene
from .image import ImageRGBA, load_png
from .op import render_tensor
from .project import (
    ALPHA_FLOOR,
    CUTOFF_SIGMA,
    LOWPASS,
    TRANSMITTANCE_EPS,
    ProjectedSplats,
    Splat2D,
    project_gaussian,
)
from .raster import TILE, BlendPlan, rasterize, rasterize_planned

__all__ = [
    "RenderGradients", "rasterize_backward", "gradcheck", "random_scene",
    "ImageRGBA", "load_png", "render_tensor", "ALPHA_FLOOR", "CUTOFF_SIGMA",
    "LOWPASS", "TRANSMITTANCE_EPS", "ProjectedSplats", "Splat2D",
    "project_gaussian", "TILE", "BlendPlan", "rasterize", "rasterize_planned",
]
