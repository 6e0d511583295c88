import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splatgen.cameras import ANGLE_GRID, Camera, orbit, rotate_z, snap_angle


def test_orbit_looks_at_origin():
    cam = orbit(37.0, 22.0, 2.5)
    origin_cam = cam.world_to_camera(np.zeros((1, 3)))[0]
    # origin lands on the optical axis at depth = radius
    assert origin_cam[0] == pytest.approx(0.0, abs=1e-12)
    assert origin_cam[1] == pytest.approx(0.0, abs=1e-12)
    assert origin_cam[2] == pytest.approx(2.5, abs=1e-12)


def test_orbit_position_radius():
    cam = orbit(123.0, -15.0, 3.0)
    assert np.linalg.norm(cam.position) == pytest.approx(3.0)


def test_orbit_azimuth_zero_geometry():
    # azimuth 0, elevation 0: camera at (r, 0, 0) looking along -x
    cam = orbit(0.0, 0.0, 2.0)
    assert np.allclose(cam.position, [2.0, 0.0, 0.0], atol=1e-12)
    ahead = cam.world_to_camera(np.array([[1.0, 0.0, 0.0]]))[0]
    assert ahead[2] == pytest.approx(1.0)


def test_snap_angle_grid():
    assert snap_angle(0.0) == 0.0
    assert snap_angle(45.0) == 45.0  # multiples of the grid stay put
    a = snap_angle(10.123456789)
    assert a / ANGLE_GRID == pytest.approx(round(a / ANGLE_GRID))
    assert abs(a - 10.123456789) <= ANGLE_GRID / 2


@given(st.floats(0, 360), st.floats(0, 360))
@settings(max_examples=100, deadline=None)
def test_snapped_offsets_cancel_exactly(base, offset):
    # (a0 + off) - a0 == off bitwise once off is on the dyadic grid
    a0 = snap_angle(base)
    off = snap_angle(offset)
    assert (a0 + off) - a0 == off


def test_pole_rejected():
    with pytest.raises(ValueError):
        orbit(0.0, 89.5, 2.0)


def test_bad_radius():
    with pytest.raises(ValueError):
        orbit(0.0, 0.0, 0.0)


def test_camera_validation():
    with pytest.raises(ValueError):
        Camera(rotation=np.eye(3) * 2.0, translation=np.zeros(3), focal=50.0,
               cx=16, cy=16, width=32, height=32)
    with pytest.raises(ValueError):
        Camera(rotation=np.eye(3), translation=np.zeros(3), focal=-1.0,
               cx=16, cy=16, width=32, height=32)


def test_rotate_z_quarter_turn():
    pts = np.array([[1.0, 0.0, 0.5]])
    out = rotate_z(pts, 90.0)
    assert np.allclose(out, [[0.0, 1.0, 0.5]], atol=1e-12)


def test_joint_rotation_preserves_camera_frame():
    # rotating the object and the camera azimuth together leaves the
    # camera-space coordinates of the rotated points unchanged
    pts = np.random.default_rng(3).uniform(-0.8, 0.8, size=(20, 3))
    for delta in (33.25, 180.0, 271.03125):
        cam_a = orbit(10.0, 25.0, 2.2)
        cam_b = orbit(snap_angle(10.0) + snap_angle(delta), 25.0, 2.2)
        a = cam_a.world_to_camera(pts)
        b = cam_b.world_to_camera(rotate_z(pts, delta))
        assert np.allclose(a, b, atol=1e-12)
