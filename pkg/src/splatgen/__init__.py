"""splatgen: amortized single-image to 3D Gaussian splat generation.

Library layers, bottom up:

- gaussians / cameras / ply_io: the scene data model and interchange
- render: differentiable tile-based splat rasterizer (forward + analytic
  backward + finite-difference gradcheck)
- nn: minimal numpy autodiff kit (tape, transformer blocks, convs, Adam)
- coarse: image encoder + query-bank geometry + triplane texture field
- superres: point-voxel super-resolution with exact feature expansion
- losses / labels: rendering loss, perceptual proxy, attribute Chamfer,
  pseudo-label fitting
- synth / train / infer / evaluate / cli: synthetic data, the staged
  training pipeline, feed-forward inference, metrics, command line
"""

__version__ = "0.1.0"

from .cameras import Camera, orbit, snap_angle
from .coarse import CoarseGenerator
from .config import TrainConfig, load_config, preset_config
from .gaussians import Covariance3, GaussianSet, build_covariance, canonical_scale, evaluate_kernel, quat_to_rotmat
from .infer import infer
from .labels import fit_pseudo_label
from .losses import LossWeights, chamfer_attribute_loss, perceptual_proxy, psnr, rendering_loss
from .ply_io import export_ply, import_ply
from .render import ImageRGBA, gradcheck, rasterize, rasterize_backward, render_tensor
from .superres import SRModule
from .synth import generate_synthetic_object, render_views, sample_cameras
from .train import train

__all__ = [
    "__version__",
    "Camera", "orbit", "snap_angle",
    "CoarseGenerator", "SRModule",
    "TrainConfig", "load_config", "preset_config",
    "Covariance3", "GaussianSet", "build_covariance", "canonical_scale",
    "evaluate_kernel", "quat_to_rotmat",
    "export_ply", "import_ply",
    "ImageRGBA", "gradcheck", "rasterize", "rasterize_backward", "render_tensor",
    "LossWeights", "chamfer_attribute_loss", "perceptual_proxy", "psnr",
    "rendering_loss", "fit_pseudo_label",
    "generate_synthetic_object", "render_views", "sample_cameras",
    "train", "infer",
]
