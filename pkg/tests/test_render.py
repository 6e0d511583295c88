import numpy as np
import pytest

from splatgen.cameras import orbit
from splatgen.gaussians import GaussianSet, build_covariance
from splatgen.render import (
    ALPHA_FLOOR,
    CUTOFF_SIGMA,
    LOWPASS,
    ImageRGBA,
    ProjectedSplats,
    project_gaussian,
    rasterize,
)
from splatgen.render.gradcheck import random_scene


def brute_force_blend(gset, cam, background=(0.0, 0.0, 0.0)):
    """Direct per-pixel front-to-back blend: every splat at every pixel,
    no tiles, no transmittance early-exit."""
    proj = ProjectedSplats(gset, cam)
    bg = np.asarray(background, dtype=np.float64)
    out = np.zeros((cam.height, cam.width, 4))
    cutoff = CUTOFF_SIGMA * CUTOFF_SIGMA
    for row in range(cam.height):
        for col in range(cam.width):
            px, py = col + 0.5, row + 0.5
            t = 1.0
            rgb = np.zeros(3)
            for i in range(len(proj)):
                dx = px - proj.center[i, 0]
                dy = py - proj.center[i, 1]
                qa, qb, qc = proj.conic[i]
                qf = qa * dx * dx + 2.0 * qb * dx * dy + qc * dy * dy
                if qf > cutoff:
                    continue
                a = proj.alpha[i] * np.exp(-0.5 * qf)
                if a < ALPHA_FLOOR:
                    continue
                rgb += proj.color[i] * a * t
                t *= 1.0 - a
            out[row, col, 0:3] = rgb + bg * t
            out[row, col, 3] = 1.0 - t
    return out


def test_on_axis_projection_oracle():
    # one gaussian at the origin, camera on the x axis: center lands on the
    # principal point and the screen covariance is (f*s/z)^2 I
    s = 0.1
    gset = GaussianSet(np.zeros((1, 3)), np.full((1, 3), 0.5), np.array([0.8]), s)
    cam = orbit(0.0, 0.0, 2.0, 32, 32)
    splat = project_gaussian(gset, 0, cam)
    assert splat is not None
    assert splat.center[0] == pytest.approx(cam.cx, abs=1e-9)
    assert splat.center[1] == pytest.approx(cam.cy, abs=1e-9)
    expected = (cam.focal * s / 2.0) ** 2
    assert np.allclose(splat.cov2d, expected * np.eye(2), atol=1e-9)
    assert splat.depth == pytest.approx(2.0)


def test_behind_camera_culled():
    means = np.array([[0.9, 0.0, 0.0]])  # between an azimuth-0 camera and +x
    gset = GaussianSet(means, np.full((1, 3), 0.5), np.array([0.8]), 0.05)
    near_cam = orbit(0.0, 0.0, 0.8, 32, 32)  # radius < mean x: behind
    assert project_gaussian(gset, 0, near_cam) is None
    img = rasterize(gset, near_cam)
    assert np.all(img.as_array()[:, :, 3] == 0.0)


def test_empty_set_renders_background():
    gset = GaussianSet(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0), 0.1)
    img = rasterize(gset, orbit(0, 0, 2.0, 16, 16), background=(0.2, 0.4, 0.6))
    arr = img.as_array()
    assert np.allclose(arr[:, :, 0:3], [0.2, 0.4, 0.6])
    assert np.all(arr[:, :, 3] == 0.0)


def test_two_splat_occlusion_oracle():
    # two gaussians on the optical axis; the nearer one shades the farther
    means = np.array([[0.3, 0.0, 0.0], [-0.3, 0.0, 0.0]])
    colors = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    opac = np.array([0.9, 0.9])
    gset = GaussianSet(means, colors, opac, 0.1)
    cam = orbit(0.0, 0.0, 2.0, 33, 33)
    img = rasterize(gset, cam).as_array()
    center = img[16, 16]
    # both kernels peak at the center pixel (on-axis), derive exactly
    p1 = project_gaussian(gset, 0, cam)
    p2 = project_gaussian(gset, 1, cam)

    def peak_alpha(splat):
        d = np.array([16.5 - splat.center[0], 16.5 - splat.center[1]])
        cov = splat.cov2d + LOWPASS * np.eye(2)
        conic = np.linalg.inv(cov)
        return splat.opacity * np.exp(-0.5 * d @ conic @ d)

    a1, a2 = peak_alpha(p1), peak_alpha(p2)
    expect_rgb = colors[0] * a1 + colors[1] * a2 * (1 - a1)
    expect_alpha = 1 - (1 - a1) * (1 - a2)
    assert np.allclose(center[0:3], expect_rgb, atol=1e-9)
    assert center[3] == pytest.approx(expect_alpha, abs=1e-9)


def test_matches_brute_force_blend():
    for seed in range(4):
        gset, cam, _ = random_scene(seed, width=32, height=32)
        img = rasterize(gset, cam).as_array()
        ref = brute_force_blend(gset, cam)
        assert np.abs(img - ref).max() <= 1.0 / 255.0


def test_deterministic_and_parallel_identical():
    gset, cam, _ = random_scene(11, width=48, height=48)
    a = rasterize(gset, cam).as_array()
    b = rasterize(gset, cam).as_array()
    c = rasterize(gset, cam, parallel=True).as_array()
    assert np.array_equal(a, b)
    assert np.array_equal(a, c)


def test_background_only_outside_alpha():
    gset, cam, _ = random_scene(5, width=32, height=32)
    black = rasterize(gset, cam, background=(0, 0, 0)).as_array()
    white = rasterize(gset, cam, background=(1, 1, 1)).as_array()
    # alpha is independent of background; rgb differs by (1-alpha)*bg
    assert np.array_equal(black[:, :, 3], white[:, :, 3])
    t = 1.0 - black[:, :, 3]
    assert np.allclose(white[:, :, 0:3] - black[:, :, 0:3], t[:, :, None], atol=1e-12)


def test_image_rgba_png_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    img = ImageRGBA(rng.uniform(0, 1, (24, 24, 3)), rng.uniform(0, 1, (24, 24)))
    p = tmp_path / "x.png"
    img.save_png(p)
    from splatgen.render import load_png

    back = load_png(p)
    # 8-bit quantization: half-step tolerance
    assert np.abs(back.as_array() - img.as_array()).max() <= 0.5 / 255.0 + 1e-9
