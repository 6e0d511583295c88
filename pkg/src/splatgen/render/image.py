"""RGBA image container and 8-bit PNG I/O (straight alpha)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from ..errors import NonFiniteInput, ShapeMismatch


@dataclass(frozen=True)
class ImageRGBA:
    """Float image: rgb (H,W,3) and alpha (H,W), both in [0,1]."""

    rgb: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        rgb = np.asarray(self.rgb)
        alpha = np.asarray(self.alpha)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ShapeMismatch(f"rgb must be (H,W,3), got {rgb.shape}")
        if alpha.shape != rgb.shape[:2]:
            raise ShapeMismatch(f"alpha {alpha.shape} does not match rgb {rgb.shape[:2]}")
        if not (np.all(np.isfinite(rgb)) and np.all(np.isfinite(alpha))):
            raise NonFiniteInput("image contains NaN/Inf")

    @property
    def shape(self) -> tuple[int, int]:
        return self.rgb.shape[:2]

    def as_array(self) -> np.ndarray:
        """Stacked (H,W,4) rgba array."""
        return np.concatenate([self.rgb, self.alpha[..., None]], axis=2)

    @classmethod
    def from_array(cls, rgba: np.ndarray) -> "ImageRGBA":
        rgba = np.asarray(rgba)
        if rgba.ndim != 3 or rgba.shape[2] != 4:
            raise ShapeMismatch(f"rgba must be (H,W,4), got {rgba.shape}")
        return cls(rgba[..., :3], rgba[..., 3])

    def save_png(self, path) -> None:
        """8-bit RGBA PNG with straight (unpremultiplied) alpha."""
        arr = np.concatenate([self.rgb, self.alpha[..., None]], axis=2)
        data = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(data, mode="RGBA").save(path)


def load_png(path) -> ImageRGBA:
    """Read any PNG as float RGBA in [0,1] (alpha 1 where absent)."""
    img = np.asarray(Image.open(path).convert("RGBA"), dtype=np.float64) / 255.0
    return ImageRGBA(img[..., :3], img[..., 3])
