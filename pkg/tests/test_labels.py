import numpy as np
import pytest

from splatgen.cameras import orbit
from splatgen.gaussians import GaussianSet
from splatgen.labels import (
    FitReport,
    fit_pseudo_label,
    has_label,
    label_path,
    read_label,
    read_manifest,
    write_label,
)
from splatgen.render import rasterize


def tiny_scene(n=16, size=24):
    rng = np.random.default_rng(0)
    phi = (1 + np.sqrt(5)) / 2
    k = np.arange(n)
    z = 1 - 2 * (k + 0.5) / n
    r = np.sqrt(1 - z * z)
    th = 2 * np.pi * k / phi
    mu = 0.45 * np.stack([r * np.cos(th), r * np.sin(th), z], axis=1)
    colors = np.clip(0.5 + mu, 0.05, 0.95)
    target = GaussianSet(mu, colors, np.full(n, 0.8), 0.16)
    cams = [orbit(a, 15.0, 2.2, size, size) for a in (0, 90, 180, 270)]
    views = [rasterize(target, c) for c in cams]
    return target, cams, views


def test_fit_improves_psnr_quickly():
    target, cams, views = tiny_scene()
    rng = np.random.default_rng(1)
    init = np.asarray(target.means) + rng.normal(0, 0.08, (len(target), 3))
    label, report = fit_pseudo_label(list(zip(cams, views)), np.clip(init, -1, 1),
                                     scale=0.16, max_iters=150)
    assert isinstance(report, FitReport)
    assert report.final_psnr > report.initial_psnr + 3.0
    assert len(label) == len(target)


def test_fit_requires_four_views():
    target, cams, views = tiny_scene()
    with pytest.raises(ValueError):
        fit_pseudo_label(list(zip(cams[:3], views[:3])), np.asarray(target.means))


def test_fit_report_fields_and_plateau():
    target, cams, views = tiny_scene(n=8)
    # init exactly at the target: the fit has nothing to gain, so the
    # plateau detector should stop it long before the budget runs out
    label, report = fit_pseudo_label(
        list(zip(cams, views)), np.asarray(target.means),
        init_colors=np.asarray(target.colors), init_opacity=0.8,
        scale=0.16, max_iters=400,
    )
    assert report.converged
    assert report.reason == "plateau"
    assert report.iterations < 400
    assert report.final_psnr > 40.0


def test_label_cache_roundtrip(tmp_path):
    target, _, _ = tiny_scene(n=8)
    report = FitReport(iterations=10, initial_loss=1.0, final_loss=0.5,
                       initial_psnr=10.0, final_psnr=16.0, converged=True,
                       reason="plateau")
    write_label(tmp_path, "obj_x", target, report)
    assert has_label(tmp_path, "obj_x")
    assert label_path(tmp_path, "obj_x").exists()
    back = read_label(tmp_path, "obj_x")
    assert len(back) == len(target)
    assert np.allclose(np.asarray(back.means), np.asarray(target.means), atol=1e-6)
    manifest = read_manifest(tmp_path)
    assert manifest["obj_x"]["final_psnr"] == 16.0
    assert not has_label(tmp_path, "obj_y")
