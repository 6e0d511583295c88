"""PLY interchange for Gaussian sets.

Binary little-endian PLY with one vertex element: float32 properties
x, y, z, red, green, blue, opacity.  The shared (aggregate) scale and
rotation ride in header comment lines:

    comment agg_scale <float>
    comment agg_rotation <w> <x> <y> <z>

Round-trip is bit-exact for float32 sets; wider dtypes are narrowed to
float32 on export.
"""

from __future__ import annotations

import numpy as np

from .errors import CountMismatch, MalformedHeader
from .gaussians import GaussianSet

_PROPS = ("x", "y", "z", "red", "green", "blue", "opacity")


def export_ply(gset: GaussianSet, path) -> None:
    """Write a Gaussian set to a binary little-endian PLY file."""
    n = len(gset)
    rot = " ".join(repr(float(v)) for v in gset.rotation)
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"comment agg_scale {float(gset.scale)!r}\n"
        f"comment agg_rotation {rot}\n"
        f"element vertex {n}\n"
        + "".join(f"property float {p}\n" for p in _PROPS)
        + "end_header\n"
    )
    body = np.empty((n, 7), dtype="<f4")
    body[:, 0:3] = gset.means
    body[:, 3:6] = gset.colors
    body[:, 6] = gset.opacities
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(body.tobytes(order="C"))


def import_ply(path) -> GaussianSet:
    """Read a Gaussian set written by export_ply.

    Raises MalformedHeader when required properties or the aggregate
    scale/rotation comments are missing, CountMismatch when the payload
    length disagrees with the declared vertex count.
    """
    with open(path, "rb") as f:
        raw = f.read()
    end_tag = b"end_header\n"
    end = raw.find(end_tag)
    if not raw.startswith(b"ply\n") or end < 0:
        raise MalformedHeader("not a PLY file (missing ply/end_header)")
    header_lines = raw[:end].decode("ascii", errors="replace").splitlines()
    payload = raw[end + len(end_tag):]

    fmt_ok = False
    n = None
    props: list[str] = []
    scale = None
    rotation = None
    in_vertex = False
    for line in header_lines[1:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt_ok = parts[1:3] == ["binary_little_endian", "1.0"]
        elif parts[0] == "comment" and len(parts) >= 2:
            if parts[1] == "agg_scale" and len(parts) == 3:
                scale = float(parts[2])
            elif parts[1] == "agg_rotation" and len(parts) == 6:
                rotation = np.array([float(v) for v in parts[2:6]])
        elif parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                n = int(parts[2])
        elif parts[0] == "property" and in_vertex:
            if parts[1] != "float":
                raise MalformedHeader(f"vertex property {parts[-1]} must be float")
            props.append(parts[-1])
    if not fmt_ok:
        raise MalformedHeader("format must be binary_little_endian 1.0")
    if n is None:
        raise MalformedHeader("missing vertex element")
    if tuple(props) != _PROPS:
        missing = set(_PROPS) - set(props)
        raise MalformedHeader(
            f"vertex properties must be {_PROPS}, got {tuple(props)}"
            + (f" (missing {sorted(missing)})" if missing else "")
        )
    if scale is None:
        raise MalformedHeader("missing 'comment agg_scale' header line")
    if rotation is None:
        raise MalformedHeader("missing 'comment agg_rotation' header line")
    expect = n * 7 * 4
    if len(payload) < expect:
        raise CountMismatch(f"payload has {len(payload)} bytes, header declares {expect}")
    if len(payload) > expect:
        raise CountMismatch(f"payload has {len(payload) - expect} trailing bytes")
    body = np.frombuffer(payload, dtype="<f4").reshape(n, 7)
    return GaussianSet(
        means=body[:, 0:3].astype(np.float32),
        colors=body[:, 3:6].astype(np.float32),
        opacities=body[:, 6].astype(np.float32),
        scale=scale,
        rotation=rotation,
    )
