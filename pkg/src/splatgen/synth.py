"""Procedural synthetic objects and the camera/view plumbing around them.

Objects are unions of 2 to 5 primitive parts (spheres, boxes,
superquadrics), each with its own pose, albedo, and a mild procedural
texture.  An object is fully determined by its seed; its surface samples
double as a dense ground-truth GaussianSet, so supervision views come out
of the same renderer the model trains through.

Azimuth convention: objects are stored in a canonical orientation and all
cameras carry azimuths relative to the input view (the normalized frame).
A joint rotation of object and cameras only shifts the bookkeeping
azimuths, which live on the dyadic angle grid, so it cancels exactly and
renders are bit-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cameras import Camera, orbit, snap_angle
from .errors import InvalidRange
from .gaussians import GaussianSet, canonical_scale
from .render import rasterize
from .render.image import ImageRGBA

PART_KINDS = ("sphere", "box", "superquadric")


@dataclass(frozen=True)
class PartSpec:
    kind: str
    center: tuple
    half_extents: tuple
    rotation: tuple  # unit quaternion, wxyz
    albedo: tuple
    exponents: tuple  # superquadric shape powers; unused for sphere/box
    texture_freq: float
    texture_axis: tuple


@dataclass(frozen=True)
class SyntheticObject:
    object_id: str
    seed: int
    parts: tuple
    surface_points: np.ndarray  # (M,3) inside [-0.8, 0.8]^3
    surface_colors: np.ndarray  # (M,3) in [0,1]


def _unit_quat(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def _quat_rotmat(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _sample_part_surface(part: PartSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n points on the part surface, in object coordinates."""
    if part.kind == "sphere":
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        local = d
    elif part.kind == "box":
        # pick a face per point weighted by its area, then uniform on it
        he = np.asarray(part.half_extents)
        areas = np.array([he[1] * he[2], he[1] * he[2], he[0] * he[2],
                          he[0] * he[2], he[0] * he[1], he[0] * he[1]])
        face = rng.choice(6, size=n, p=areas / areas.sum())
        u = rng.uniform(-1, 1, size=(n, 2))
        local = np.empty((n, 3))
        axis = face // 2
        sign = np.where(face % 2 == 0, 1.0, -1.0)
        for i in range(n):
            a = axis[i]
            rest = [j for j in range(3) if j != a]
            local[i, a] = sign[i]
            local[i, rest[0]] = u[i, 0]
            local[i, rest[1]] = u[i, 1]
    else:  # superquadric: signed-power mapping of sphere directions
        e1, e2 = part.exponents
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        sin_el = d[:, 2]
        cos_el = np.sqrt(np.maximum(1.0 - sin_el**2, 1e-12))
        az = np.arctan2(d[:, 1], d[:, 0])

        def spow(v, e):
            return np.sign(v) * np.abs(v) ** e

        local = np.stack([
            spow(cos_el, e1) * spow(np.cos(az), e2),
            spow(cos_el, e1) * spow(np.sin(az), e2),
            spow(sin_el, e1),
        ], axis=1)
    scaled = local * np.asarray(part.half_extents)
    return scaled @ _quat_rotmat(np.asarray(part.rotation)).T + np.asarray(part.center)


def _part_colors(part: PartSpec, points: np.ndarray) -> np.ndarray:
    """Albedo modulated by a mild sinusoidal texture along a random axis."""
    phase = points @ np.asarray(part.texture_axis)
    tex = 0.8 + 0.2 * np.sin(part.texture_freq * phase)
    return np.clip(np.asarray(part.albedo) * tex[:, None], 0.0, 1.0)


def generate_synthetic_object(seed: int, n_points: int = 4096,
                              object_id: str | None = None) -> SyntheticObject:
    """Deterministic 2-5 part object with >= n_points surface samples."""
    rng = np.random.default_rng([97, seed])
    n_parts = int(rng.integers(2, 6))
    parts = []
    for _ in range(n_parts):
        kind = PART_KINDS[rng.integers(0, len(PART_KINDS))]
        albedo = rng.uniform(0.25, 1.0, size=3)
        albedo[rng.integers(0, 3)] = rng.uniform(0.7, 1.0)  # keep parts saturated
        parts.append(PartSpec(
            kind=kind,
            center=tuple(rng.uniform(-0.32, 0.32, size=3)),
            half_extents=tuple(rng.uniform(0.12, 0.38, size=3)),
            rotation=tuple(_unit_quat(rng)),
            albedo=tuple(albedo),
            exponents=tuple(rng.uniform(0.4, 1.6, size=2)),
            texture_freq=float(rng.uniform(4.0, 12.0)),
            texture_axis=tuple(rng.normal(size=3)),
        ))

    per = np.full(n_parts, n_points // n_parts)
    per[: n_points % n_parts] += 1
    pts, cols = [], []
    for part, k in zip(parts, per):
        p = _sample_part_surface(part, int(k), rng)
        pts.append(p)
        cols.append(_part_colors(part, p))
    points = np.concatenate(pts, axis=0)
    colors = np.concatenate(cols, axis=0)

    # enforce the [-0.8, 0.8]^3 bound with one uniform shrink
    m = float(np.abs(points).max())
    if m > 0.8:
        points = points * (0.8 / m)
    return SyntheticObject(
        object_id=object_id or f"obj{seed:05d}",
        seed=seed,
        parts=tuple(parts),
        surface_points=points,
        surface_colors=colors,
    )


def dense_gaussians(obj: SyntheticObject, opacity: float = 0.9) -> GaussianSet:
    """The object's ground-truth set: one Gaussian per surface sample."""
    n = obj.surface_points.shape[0]
    return GaussianSet(
        obj.surface_points,
        obj.surface_colors,
        np.full(n, opacity),
        canonical_scale(n),
        np.array([1.0, 0.0, 0.0, 0.0]),
    )


# -- cameras -------------------------------------------------------------------

DEFAULT_RADIUS = 2.2
INPUT_ELEVATION = 15.0


def sample_cameras(
    n: int,
    elevation_range: tuple[float, float] = (-10.0, 50.0),
    radius: float = DEFAULT_RADIUS,
    *,
    seed: int = 0,
    input_azimuth: float = 0.0,
    width: int = 64,
    height: int = 64,
) -> list[Camera]:
    """n cameras on the orbit sphere; index 0 is the input view.

    All azimuths are normalized so the input view sits at azimuth exactly
    0: a random (or given) input azimuth is subtracted from every camera,
    i.e. the scene is jointly rotated into the input frame.  Angles live
    on the dyadic grid, so the subtraction is exact and two scenes
    differing only by a joint rotation produce identical cameras.
    """
    if n < 1:
        raise InvalidRange(f"need n >= 1 cameras, got {n}")
    lo, hi = elevation_range
    if not (-89.0 < lo <= hi < 89.0):
        raise InvalidRange(f"elevation range must satisfy -89 < lo <= hi < 89, got {elevation_range}")
    if radius <= 0:
        raise InvalidRange(f"radius must be positive, got {radius}")
    rng = np.random.default_rng([131, seed])
    a0 = snap_angle(input_azimuth)
    cams = [orbit(0.0, INPUT_ELEVATION, radius, width, height)]
    for _ in range(n - 1):
        # offsets relative to the input view snap to the grid, so the
        # normalized azimuth (a0 + offset) - a0 == offset is exact for any a0
        offset = snap_angle(rng.uniform(0.0, 360.0))
        el = snap_angle(rng.uniform(lo, hi))
        az = (a0 + offset) - a0
        cams.append(orbit(az, el, radius, width, height))
    return cams


def render_views(obj: SyntheticObject, cams: list[Camera],
                 opacity: float = 0.9) -> list[ImageRGBA]:
    """Ground-truth rgba views: direct splatting of the dense set."""
    dense = dense_gaussians(obj, opacity)
    return [rasterize(dense, cam) for cam in cams]


# -- dataset directory ---------------------------------------------------------

def object_dir(root, object_id: str) -> Path:
    return Path(root) / "objects" / object_id


def write_object(root, obj: SyntheticObject, cams: list[Camera],
                 views: list[ImageRGBA]) -> None:
    """objects/<id>/spec, objects/<id>/cams, objects/<id>/views/<k>.png"""
    d = object_dir(root, obj.object_id)
    (d / "views").mkdir(parents=True, exist_ok=True)
    spec = {
        "object_id": obj.object_id,
        "seed": obj.seed,
        "n_points": int(obj.surface_points.shape[0]),
        "parts": [{"kind": p.kind, "albedo": list(p.albedo)} for p in obj.parts],
    }
    (d / "spec").write_text(json.dumps(spec, indent=2))
    cam_rows = [
        {"azimuth": c.azimuth, "elevation": c.elevation, "radius": float(np.linalg.norm(c.position)),
         "focal": c.focal, "width": c.width, "height": c.height, "input": (i == 0)}
        for i, c in enumerate(cams)
    ]
    (d / "cams").write_text(json.dumps(cam_rows, indent=2))
    for k, img in enumerate(views):
        img.save_png(d / "views" / f"{k}.png")


def read_object(root, object_id: str) -> SyntheticObject:
    """Rebuild the object deterministically from its recorded seed."""
    spec = json.loads((object_dir(root, object_id) / "spec").read_text())
    return generate_synthetic_object(spec["seed"], spec["n_points"], object_id=spec["object_id"])


def read_cameras(root, object_id: str) -> list[Camera]:
    rows = json.loads((object_dir(root, object_id) / "cams").read_text())
    return [
        orbit(r["azimuth"], r["elevation"], r["radius"], r["width"], r["height"], focal=r["focal"])
        for r in rows
    ]


def list_objects(root) -> list[str]:
    base = Path(root) / "objects"
    if not base.is_dir():
        return []
    return sorted(p.name for p in base.iterdir() if (p / "spec").exists())
