"""Pinhole cameras and orbit-pose construction.

Convention: world is z-up, camera space is x-right / y-down / z-forward,
points in front of the camera have positive depth z.  Pixel (row, col) has
its center at (col + 0.5, row + 0.5).

Orbit angles snap to a dyadic grid (multiples of 2^-16 degrees) so that
differences of snapped angles are exact in float64: a shared azimuth offset
added to every angle in a scene cancels exactly when relative azimuths are
formed, which downstream code relies on for bit-identical renders under
joint rotation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteInput, ShapeMismatch

ANGLE_GRID = float(2.0**-16)  # degrees


def snap_angle(degrees: float) -> float:
    """Round an angle in degrees to the dyadic grid (multiples of 2^-16 deg)."""
    return float(np.round(float(degrees) / ANGLE_GRID) * ANGLE_GRID)


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: world-to-camera rigid transform plus intrinsics."""

    rotation: np.ndarray  # (3,3) world-to-camera
    translation: np.ndarray  # (3,)
    focal: float
    cx: float
    cy: float
    width: int
    height: int
    near: float = 0.05
    far: float = 100.0
    azimuth: float | None = None  # degrees, set by orbit(); informational
    elevation: float | None = None

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if r.shape != (3, 3):
            raise ShapeMismatch(f"rotation must be (3,3), got {r.shape}")
        if t.shape != (3,):
            raise ShapeMismatch(f"translation must be (3,), got {t.shape}")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise NonFiniteInput("camera pose contains NaN/Inf")
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6, rtol=0.0):
            raise ValueError("rotation is not orthonormal within 1e-6")
        if self.focal <= 0:
            raise ValueError(f"focal must be > 0, got {self.focal}")
        if not (0 < self.near < self.far):
            raise ValueError(f"need 0 < near < far, got near={self.near} far={self.far}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        r = r.copy()
        t = t.copy()
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    @property
    def position(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation


def look_at(position, target, up=(0.0, 0.0, 1.0)) -> tuple[np.ndarray, np.ndarray]:
    """World-to-camera (R, t) looking from position toward target."""
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    forward = target - position
    nf = np.linalg.norm(forward)
    if nf < 1e-12:
        raise ValueError("look_at position coincides with target")
    forward = forward / nf
    right = np.cross(forward, up)
    nr = np.linalg.norm(right)
    if nr < 1e-9:
        raise ValueError("view direction parallel to up vector")
    right = right / nr
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward], axis=0)
    return rot, -rot @ position


def orbit(
    azimuth_deg: float,
    elevation_deg: float,
    radius: float,
    width: int = 64,
    height: int = 64,
    focal: float | None = None,
    near: float = 0.05,
    far: float = 100.0,
) -> Camera:
    """Camera on a z-up orbit around the origin, looking at the origin.

    Angles are snapped to the dyadic grid; see the module docstring.  The
    default focal length frames the [-1,1]^3 cube with a small margin.
    """
    az = snap_angle(azimuth_deg)
    el = snap_angle(elevation_deg)
    if abs(el) >= 89.0:
        raise ValueError("elevation must stay below +/-89 degrees (pole-free orbit)")
    if radius <= 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    az_r = np.deg2rad(az)
    el_r = np.deg2rad(el)
    pos = radius * np.array(
        [np.cos(el_r) * np.cos(az_r), np.cos(el_r) * np.sin(az_r), np.sin(el_r)]
    )
    rot, t = look_at(pos, (0.0, 0.0, 0.0))
    if focal is None:
        # frame a unit-ish object: half-extent ~1.1 at distance `radius`
        focal = 0.5 * width * radius / 1.1
    return Camera(
        rotation=rot,
        translation=t,
        focal=float(focal),
        cx=width / 2.0,
        cy=height / 2.0,
        width=width,
        height=height,
        near=near,
        far=far,
        azimuth=az,
        elevation=el,
    )


def rotate_z(points: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate points about the world z axis by a snapped angle in degrees."""
    a = np.deg2rad(snap_angle(degrees))
    c, s = np.cos(a), np.sin(a)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return np.asarray(points, dtype=np.float64) @ rot.T
