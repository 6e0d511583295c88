"""Point-voxel super-resolution: N coarse Gaussians -> N*factor fine ones.

Attributes are embedded per point, mixed through point-voxel blocks (a
trilinear scatter to a voxel grid, two 3x3x3 convolutions, a trilinear
gather back, plus a pointwise MLP branch), conditioned on image patch
tokens by residual cross-attention, then split channel-wise into `factor`
sub-points per parent.  Fine locations are bounded offsets from the parent
location; colors and opacities come from logistic heads.

Voxel coordinates use the coarse locations as fixed sample positions:
gradients flow through features, not through the scatter geometry.
"""

from __future__ import annotations

import numpy as np

from .coarse import GaussianTensors, ImageFeatures, logit
from .errors import IndivisibleWidth, ShapeMismatch
from . import nn
from .nn import LayerNorm, Linear, MLP, MultiHeadAttention, ParamStore, Tensor


def conv3_init(rng: np.random.Generator, c_out: int, c_in: int, k: int = 3) -> np.ndarray:
    fan_in = c_in * k * k * k
    return rng.normal(0.0, np.sqrt(1.0 / fan_in), size=(c_out, c_in, k, k, k))


class PointVoxelBlock:
    """Residual mixer: voxelized 3D convs + pointwise MLP, gathered per point."""

    def __init__(self, store: ParamStore, name: str, width: int, grid: int,
                 rng: np.random.Generator):
        self.grid = grid
        self.w1 = store.add(f"{name}.conv1.w", conv3_init(rng, width, width))
        self.b1 = store.add(f"{name}.conv1.b", np.zeros(width))
        self.w2 = store.add(f"{name}.conv2.w", conv3_init(rng, width, width))
        self.b2 = store.add(f"{name}.conv2.b", np.zeros(width))
        self.mlp = MLP(store, f"{name}.mlp", width, width, width, rng)

    def __call__(self, feats: Tensor, positions: np.ndarray) -> Tensor:
        g = self.grid
        c = feats.shape[1]
        vox = nn.scatter_average(feats, positions, g)  # (g^3, C)
        vol = vox.reshape(g, g, g, c).transpose((3, 0, 1, 2))
        vol = nn.gelu(nn.conv3d(vol, self.w1, self.b1))
        vol = nn.conv3d(vol, self.w2, self.b2)
        flat = vol.transpose((1, 2, 3, 0)).reshape(g * g * g, c)
        return nn.gather_trilinear(flat, positions, g) + self.mlp(feats)


class RGBInject:
    """Pre-norm residual cross-attention from point features to patch tokens."""

    def __init__(self, store: ParamStore, name: str, width: int, image_dim: int,
                 heads: int, rng: np.random.Generator, zero_out: bool = False):
        self.ln = LayerNorm(store, f"{name}.ln", width)
        self.attn = MultiHeadAttention(store, f"{name}.attn", width, heads, rng,
                                       ctx_dim=image_dim, zero_out=zero_out)

    def __call__(self, feats: Tensor, patch_tokens: Tensor) -> Tensor:
        return feats + self.attn(self.ln(feats), patch_tokens)


class SRModule:
    """Upsample a coarse Gaussian set by an integer factor.

    Channel widths run width -> 2*width -> 2*width/factor so the sub-point
    split is a pure reshape; 2*width must be divisible by factor and the
    split width by `heads`.
    """

    def __init__(
        self,
        store: ParamStore,
        rng: np.random.Generator,
        *,
        factor: int = 4,
        width: int = 32,
        grid: int = 16,
        heads: int = 4,
        image_dim: int = 256,
        offset_scale: float = 2.0,
        opacity_init: float = 0.1,
    ):
        wide = 2 * width
        if wide % factor:
            raise IndivisibleWidth(f"2*width {wide} not divisible by factor {factor}")
        fine = wide // factor
        if fine % heads:
            raise IndivisibleWidth(f"split width {fine} not divisible by heads {heads}")
        if grid % 2:
            raise ShapeMismatch(f"voxel grid {grid} must be even (halved mid-module)")
        self.factor = factor
        self.offset_scale = offset_scale
        self.forward_calls = 0

        self.embed = Linear(store, "sr.embed", 7, width, rng)
        self.enc1 = PointVoxelBlock(store, "sr.enc1", width, grid, rng)
        self.widen = Linear(store, "sr.widen", width, wide, rng)
        self.enc2 = PointVoxelBlock(store, "sr.enc2", wide, grid // 2, rng)
        self.inject_coarse = RGBInject(store, "sr.inject_coarse", wide, image_dim, heads, rng)
        self.inject_fine = RGBInject(store, "sr.inject_fine", fine, image_dim, heads, rng)
        self.dec1 = PointVoxelBlock(store, "sr.dec1", fine, grid // 2, rng)
        self.dec2 = PointVoxelBlock(store, "sr.dec2", fine, grid, rng)
        self.head_offset = MLP(store, "sr.head_offset", fine, fine, 3, rng, zero_out=True)
        self.head_color = MLP(store, "sr.head_color", fine, fine, 3, rng)
        self.head_opacity = Linear(store, "sr.head_opacity", fine, 1, rng,
                                   bias_init=logit(opacity_init))

    def forward(self, coarse: GaussianTensors, feats: ImageFeatures,
                coarse_scale: float) -> GaussianTensors:
        self.forward_calls += 1
        n = coarse.means.shape[0]
        pos = np.asarray(coarse.means.data, dtype=np.float64)

        attrs = nn.concat(
            [coarse.means, coarse.colors, coarse.opacities.reshape(n, 1)], axis=1
        )
        f = self.embed(attrs)
        f = self.enc1(f, pos)
        f = self.widen(f)
        f = self.enc2(f, pos)
        f = self.inject_coarse(f, feats.patch_tokens)

        f = nn.expand_features(f, self.factor)  # (N*factor, fine)
        child_of = np.repeat(np.arange(n), self.factor)
        pos_fine = pos[child_of]
        f = self.inject_fine(f, feats.patch_tokens)
        f = self.dec1(f, pos_fine)
        f = self.dec2(f, pos_fine)

        parents = nn.index_gather(coarse.means, child_of)  # (N*factor, 3)
        reach = self.offset_scale * float(coarse_scale)
        means = parents + nn.tanh(self.head_offset(f)) * reach
        colors = nn.sigmoid(self.head_color(f))
        opacities = nn.sigmoid(self.head_opacity(f)).reshape(n * self.factor)
        return GaussianTensors(means, colors, opacities)

    __call__ = forward
