"""Isotropic 3D Gaussian sets: the scene representation.

A set stores per-Gaussian means, diffuse RGB colors, and opacities, plus a
single scale and a single rotation quaternion shared by the whole set.  The
shared covariance is built as Sigma = R diag(s,s,s)^2 R^T, which for an
isotropic diag collapses to s^2 I; the general product is still formed so the
quaternion path stays honest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateQuaternion,
    EmptySet,
    NonFiniteInput,
    ShapeMismatch,
    SingularCovariance,
)

IDENTITY_QUAT = (1.0, 0.0, 0.0, 0.0)

# Shared-scale anchors: canonical scale for a given point count.  Off-anchor
# counts fall back to a surface-coverage law (scale ~ 1/sqrt(n)).
_CANONICAL_SCALE_TABLE = {4096: 0.03, 16384: 0.01}


def canonical_scale(n: int) -> float:
    """Canonical shared scale for a set of n Gaussians."""
    if n <= 0:
        raise EmptySet("canonical_scale needs n >= 1")
    exact = _CANONICAL_SCALE_TABLE.get(int(n))
    if exact is not None:
        return exact
    return 0.03 * float(np.sqrt(4096.0 / n))


def _check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN/Inf")


def quat_to_rotmat(q) -> np.ndarray:
    """Rotation matrix from a wxyz quaternion.

    The quaternion must be within 1e-3 of unit norm; it is normalized
    internally.  q and -q map to the same rotation.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise ShapeMismatch(f"quaternion must have shape (4,), got {q.shape}")
    _check_finite("quaternion", q)
    n = float(np.linalg.norm(q))
    if n < 1e-6:
        raise DegenerateQuaternion(f"quaternion norm {n:.3e} is near zero")
    if abs(n - 1.0) > 1e-3:
        raise DegenerateQuaternion(f"quaternion norm {n:.6f} too far from 1 to normalize")
    w, x, y, z = q / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


@dataclass(frozen=True)
class Covariance3:
    """Symmetric positive semi-definite 3x3 matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ShapeMismatch(f"covariance must be 3x3, got {m.shape}")
        _check_finite("covariance", m)
        if not np.allclose(m, m.T, atol=1e-9, rtol=0.0):
            raise ValueError("covariance is not symmetric within 1e-9")
        eigvals = np.linalg.eigvalsh(0.5 * (m + m.T))
        if eigvals.min() < -1e-9:
            raise ValueError(f"covariance has eigenvalue {eigvals.min():.3e} < -1e-9")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def build_covariance(scale: float, rotation) -> Covariance3:
    """Sigma = R diag(s,s,s)^2 R^T for shared scale s and wxyz quaternion.

    With an isotropic diagonal this equals s^2 I for any rotation; the full
    product is still computed.
    """
    scale = float(scale)
    if not np.isfinite(scale):
        raise NonFiniteInput("scale is not finite")
    if scale <= 0:
        raise ValueError(f"scale must be > 0, got {scale}")
    rot = quat_to_rotmat(rotation)
    s_mat = np.diag([scale, scale, scale])
    m = rot @ s_mat @ s_mat.T @ rot.T
    return Covariance3(m)


def evaluate_kernel(cov: Covariance3, offset) -> float:
    """Unnormalized Gaussian kernel exp(-0.5 x^T Sigma^-1 x) at offset x.

    Sigma is regularized with +1e-9 I before inversion; raises
    SingularCovariance if the smallest eigenvalue is still <= 1e-12.
    """
    x = np.asarray(offset, dtype=np.float64)
    if x.shape != (3,):
        raise ShapeMismatch(f"offset must have shape (3,), got {x.shape}")
    _check_finite("offset", x)
    m = cov.matrix + 1e-9 * np.eye(3)
    eigvals = np.linalg.eigvalsh(m)
    if eigvals.min() <= 1e-12:
        raise SingularCovariance(f"smallest eigenvalue {eigvals.min():.3e} <= 1e-12")
    sol = np.linalg.solve(m, x)
    return float(np.exp(-0.5 * float(x @ sol)))


def _ro(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GaussianSet:
    """Immutable set of N isotropic Gaussians with shared scale/rotation.

    means in [-1,1]^3, colors and opacities in [0,1]; scale > 0; rotation a
    unit wxyz quaternion.  N is fixed for the lifetime of the set.
    """

    means: np.ndarray
    colors: np.ndarray
    opacities: np.ndarray
    scale: float
    rotation: np.ndarray = field(default_factory=lambda: np.array(IDENTITY_QUAT))

    def __post_init__(self):
        means = np.asarray(self.means)
        colors = np.asarray(self.colors)
        opac = np.asarray(self.opacities)
        if means.dtype not in (np.float32, np.float64):
            means = means.astype(np.float64)
        colors = colors.astype(means.dtype, copy=False)
        opac = opac.astype(means.dtype, copy=False)
        if means.ndim != 2 or means.shape[1] != 3:
            raise ShapeMismatch(f"means must be (N,3), got {means.shape}")
        n = means.shape[0]
        if colors.shape != (n, 3):
            raise ShapeMismatch(f"colors must be ({n},3), got {colors.shape}")
        if opac.shape != (n,):
            raise ShapeMismatch(f"opacities must be ({n},), got {opac.shape}")
        for name, arr in (("means", means), ("colors", colors), ("opacities", opac)):
            _check_finite(name, arr)
        if n > 0:
            if np.abs(means).max() > 1.0 + 1e-6:
                raise ValueError("means outside [-1,1]^3")
            if colors.min() < -1e-6 or colors.max() > 1.0 + 1e-6:
                raise ValueError("colors outside [0,1]")
            if opac.min() < -1e-6 or opac.max() > 1.0 + 1e-6:
                raise ValueError("opacities outside [0,1]")
        scale = float(self.scale)
        if not np.isfinite(scale):
            raise NonFiniteInput("scale is not finite")
        if scale <= 0:
            raise ValueError(f"scale must be > 0, got {scale}")
        rot = np.asarray(self.rotation, dtype=np.float64)
        if rot.shape != (4,):
            raise ShapeMismatch(f"rotation must be (4,), got {rot.shape}")
        _check_finite("rotation", rot)
        if abs(float(np.linalg.norm(rot)) - 1.0) > 1e-6:
            raise DegenerateQuaternion("rotation quaternion must be unit norm within 1e-6")
        object.__setattr__(self, "means", _ro(means))
        object.__setattr__(self, "colors", _ro(colors))
        object.__setattr__(self, "opacities", _ro(opac))
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "rotation", _ro(rot))

    def __len__(self) -> int:
        return self.means.shape[0]

    def covariance(self) -> Covariance3:
        return build_covariance(self.scale, self.rotation)

    @classmethod
    def canonical(cls, means, colors, opacities, rotation=IDENTITY_QUAT) -> "GaussianSet":
        """Build a set with the canonical scale for its point count."""
        n = np.asarray(means).shape[0]
        return cls(means, colors, opacities, canonical_scale(n), np.asarray(rotation, dtype=np.float64))

    def replace(self, **kwargs) -> "GaussianSet":
        fields = dict(
            means=self.means,
            colors=self.colors,
            opacities=self.opacities,
            scale=self.scale,
            rotation=self.rotation,
        )
        fields.update(kwargs)
        return GaussianSet(**fields)
