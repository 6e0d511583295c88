"""Coarse hybrid generator: one image in, N Gaussians out.

Three cooperating parts, all reading the same encoded image:

- a ViT-style patch encoder producing per-patch tokens plus a global token;
- a geometry path: a learned bank of N query tokens, shifted by the global
  token, cross-attending to patch tokens, decoded to locations in [-1,1]^3
  by a tanh MLP head;
- a texture path: a second learned bank of plane-patch tokens generating
  three feature planes (triplane); predicted locations sample the planes
  bilinearly (xy, xz, yz), and a shared MLP decodes the concatenated
  features to RGB and opacity through logistics.

The texture path can be disabled (ablations); the geometry head then grows
color/opacity channels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ShapeMismatch
from .gaussians import GaussianSet
from . import nn
from .nn import (
    MLP,
    LayerNorm,
    Linear,
    MultiHeadAttention,
    ParamStore,
    Tensor,
    TransformerBlock,
)


def logit(p: float) -> float:
    return float(np.log(p / (1.0 - p)))


class GaussianTensors(NamedTuple):
    """Differentiable Gaussian attributes (shared scale/rotation ride along
    as plain constants on the GaussianSet side)."""

    means: Tensor
    colors: Tensor
    opacities: Tensor

    def to_set(self, scale: float, rotation=(1.0, 0.0, 0.0, 0.0)) -> GaussianSet:
        return GaussianSet(
            np.clip(self.means.data, -1.0, 1.0),
            np.clip(self.colors.data, 0.0, 1.0),
            np.clip(self.opacities.data, 0.0, 1.0),
            scale,
            np.asarray(rotation, dtype=np.float64),
        )


@dataclass
class ImageFeatures:
    """Encoder output: (P, D) patch tokens and a (D,) global token."""

    patch_tokens: Tensor
    global_token: Tensor


@dataclass
class Triplane:
    """Three (R, R, F) feature planes plus the shared texture decoder.

    The decoder parameters are model parameters (trained), not generated
    per image; only the planes come from the image.
    """

    planes: Tensor  # (3, R, R, F)
    decoder: "TextureDecoder"


class TextureDecoder:
    """Shared MLP from concatenated plane features to (rgb, opacity)."""

    def __init__(self, store: ParamStore, name: str, feat: int, hidden: int,
                 rng: np.random.Generator, opacity_init: float = 0.1):
        self.fc1 = Linear(store, f"{name}.fc1", 3 * feat, hidden, rng)
        self.fc2 = Linear(store, f"{name}.fc2", hidden, hidden, rng)
        bias = np.zeros(4)
        bias[3] = logit(opacity_init)
        self.out = Linear(store, f"{name}.out", hidden, 4, rng, bias_init=bias)

    def __call__(self, feats: Tensor) -> tuple[Tensor, Tensor]:
        h = nn.gelu(self.fc1(feats))
        h = nn.gelu(self.fc2(h))
        raw = self.out(h)
        return nn.sigmoid(raw[:, 0:3]), nn.sigmoid(raw[:, 3])


def patchify(image: np.ndarray, patch: int) -> np.ndarray:
    """(S,S,3) -> (P, patch*patch*3) row-major patch grid."""
    s = image.shape[0]
    if image.shape != (s, s, 3) or s % patch:
        raise ShapeMismatch(f"image must be square (S,S,3) with S divisible by {patch}")
    g = s // patch
    return (
        image.reshape(g, patch, g, patch, 3)
        .transpose(0, 2, 1, 3, 4)
        .reshape(g * g, patch * patch * 3)
    )


def query_texture_field(triplane: Triplane, locations: Tensor) -> tuple[Tensor, Tensor]:
    """Sample the triplane at (N,3) locations and decode to (rgb, opacity).

    Locations outside [-1,1]^3 are clamped (with a warning); plane pairs are
    xy, xz, yz.
    """
    locs = nn.as_tensor(locations)
    if locs.ndim != 2 or locs.shape[1] != 3:
        raise ShapeMismatch(f"locations must be (N,3), got {locs.shape}")
    if np.abs(locs.data).max() > 1.0 + 1e-9:
        warnings.warn("texture query outside [-1,1]^3; clamping", stacklevel=2)
        locs = nn.clip(locs, -1.0, 1.0)
    xy = nn.concat([locs[:, 0:1], locs[:, 1:2]], axis=1)
    xz = nn.concat([locs[:, 0:1], locs[:, 2:3]], axis=1)
    yz = nn.concat([locs[:, 1:2], locs[:, 2:3]], axis=1)
    f_xy = nn.bilinear_sample(triplane.planes[0], xy)
    f_xz = nn.bilinear_sample(triplane.planes[1], xz)
    f_yz = nn.bilinear_sample(triplane.planes[2], yz)
    return triplane.decoder(nn.concat([f_xy, f_xz, f_yz], axis=1))


class CoarseGenerator:
    """Amortized image -> N coarse Gaussians (no per-scene optimization)."""

    def __init__(
        self,
        store: ParamStore,
        rng: np.random.Generator,
        *,
        image_size: int = 64,
        patch_size: int = 8,
        dim: int = 256,
        heads: int = 4,
        encoder_blocks: int = 4,
        geometry_blocks: int = 2,
        texture_blocks: int = 2,
        n_gaussians: int = 256,
        plane_res: int = 32,
        plane_feat: int = 16,
        plane_patch: int = 4,
        decode_hidden: int = 64,
        texture_field: bool = True,
        opacity_init: float = 0.1,
    ):
        if image_size % patch_size:
            raise ShapeMismatch(f"patch {patch_size} does not tile image {image_size}")
        if plane_res % plane_patch:
            raise ShapeMismatch(f"plane patch {plane_patch} does not tile plane {plane_res}")
        self.image_size = image_size
        self.patch_size = patch_size
        self.dim = dim
        self.n_gaussians = n_gaussians
        self.plane_res = plane_res
        self.plane_feat = plane_feat
        self.plane_patch = plane_patch
        self.texture_field = texture_field
        self.forward_calls = 0
        n_patches = (image_size // patch_size) ** 2

        self.patch_embed = Linear(store, "enc.embed", patch_size * patch_size * 3, dim, rng)
        self.cls_token = store.add("enc.cls", rng.normal(0.0, 0.02, size=(1, dim)))
        self.pos_embed = store.add("enc.pos", rng.normal(0.0, 0.02, size=(n_patches + 1, dim)))
        self.encoder = [
            TransformerBlock(store, f"enc.block{i}", dim, heads, rng, with_cross=False)
            for i in range(encoder_blocks)
        ]
        self.encoder_norm = LayerNorm(store, "enc.norm", dim)

        self.query_bank = store.add("geo.bank", rng.normal(0.0, 0.02, size=(n_gaussians, dim)))
        self.geometry = [
            TransformerBlock(store, f"geo.block{i}", dim, heads, rng, ctx_dim=dim)
            for i in range(geometry_blocks)
        ]
        self.geometry_norm = LayerNorm(store, "geo.norm", dim)
        geo_out = 3 if texture_field else 7
        self.geometry_head = MLP(store, "geo.head", dim, dim, geo_out, rng)
        # keep initial locations well inside tanh's linear range; a saturated
        # start kills the position gradients and the set never un-sticks
        store["geo.head.fc2.w"].data *= 0.05
        if not texture_field:
            # bias the direct opacity channel like the texture decoder would
            store["geo.head.fc2.b"].data[6] = logit(opacity_init)

        if texture_field:
            n_plane_tokens = 3 * (plane_res // plane_patch) ** 2
            self.plane_bank = store.add(
                "tex.bank", rng.normal(0.0, 0.02, size=(n_plane_tokens, dim))
            )
            self.texture = [
                TransformerBlock(store, f"tex.block{i}", dim, heads, rng, ctx_dim=dim)
                for i in range(texture_blocks)
            ]
            self.texture_norm = LayerNorm(store, "tex.norm", dim)
            self.plane_head = Linear(
                store, "tex.head", dim, plane_patch * plane_patch * plane_feat, rng
            )
            self.decoder = TextureDecoder(
                store, "tex.decode", plane_feat, decode_hidden, rng, opacity_init
            )

    # -- stages ------------------------------------------------------------
    def encode_image(self, image: np.ndarray) -> ImageFeatures:
        image = np.asarray(image, dtype=np.float32)
        if image.shape != (self.image_size, self.image_size, 3):
            raise ShapeMismatch(
                f"expected ({self.image_size},{self.image_size},3) image, got {image.shape}"
            )
        patches = self.patch_embed(Tensor(patchify(image, self.patch_size)))
        tokens = nn.concat([self.cls_token, patches], axis=0) + self.pos_embed
        for block in self.encoder:
            tokens = block(tokens)
        tokens = self.encoder_norm(tokens)
        return ImageFeatures(patch_tokens=tokens[1:], global_token=tokens[0])

    def predict_locations(self, feats: ImageFeatures) -> Tensor:
        x = self.query_bank + feats.global_token
        for block in self.geometry:
            x = block(x, feats.patch_tokens)
        raw = self.geometry_head(self.geometry_norm(x))
        if self.texture_field:
            return nn.tanh(raw)
        return raw  # split by forward()

    def generate_triplane(self, feats: ImageFeatures) -> Triplane:
        if not self.texture_field:
            raise RuntimeError("texture field disabled in this generator")
        x = self.plane_bank + feats.global_token
        for block in self.texture:
            x = block(x, feats.patch_tokens)
        tokens = self.plane_head(self.texture_norm(x))
        planes = unpatchify_planes(tokens, self.plane_res, self.plane_patch, self.plane_feat)
        return Triplane(planes=planes, decoder=self.decoder)

    def forward(self, image: np.ndarray, return_features: bool = False):
        self.forward_calls += 1
        feats = self.encode_image(image)
        if self.texture_field:
            locs = self.predict_locations(feats)
            tri = self.generate_triplane(feats)
            colors, opac = query_texture_field(tri, locs)
        else:
            raw = self.predict_locations(feats)
            locs = nn.tanh(raw[:, 0:3])
            colors = nn.sigmoid(raw[:, 3:6])
            opac = nn.sigmoid(raw[:, 6])
        out = GaussianTensors(locs, colors, opac)
        return (out, feats) if return_features else out

    __call__ = forward


def unpatchify_planes(tokens: Tensor, plane_res: int, patch: int, feat: int) -> Tensor:
    """(3*(R/p)^2, p*p*F) plane-patch tokens -> (3, R, R, F) planes.

    Token k of plane q covers the p x p node block at row-major patch index
    k; a perturbation of one token stays inside its block.
    """
    g = plane_res // patch
    if tokens.shape != (3 * g * g, patch * patch * feat):
        raise ShapeMismatch(f"unexpected token grid {tokens.shape}")
    x = tokens.reshape(3, g, g, patch, patch, feat)
    x = x.transpose((0, 1, 3, 2, 4, 5))
    return x.reshape(3, plane_res, plane_res, feat)
