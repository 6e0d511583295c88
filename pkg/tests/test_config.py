import pytest

from splatgen.config import (
    TrainConfig,
    config_dict,
    load_config,
    preset_config,
    save_config,
    stage1_lr,
    stage1_weights,
)
from splatgen.errors import ConfigError


def test_presets():
    desk = preset_config("desk")
    assert desk.coarse_n == 256
    assert desk.sr_factor == 4
    assert desk.input_res == 64
    paper = preset_config("paper")
    assert paper.coarse_n == 4096
    assert paper.input_res == 256
    with pytest.raises(ConfigError):
        preset_config("lab")


def test_file_and_override_merge(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text("coarse_n: 64\nlr_coarse: 0.001\n")
    cfg = load_config(p, overrides={"lr_coarse": 0.01, "seed": 3})
    # flag beats file, file beats preset, untouched keys keep preset values
    assert cfg.lr_coarse == 0.01
    assert cfg.coarse_n == 64
    assert cfg.seed == 3
    assert cfg.dim == preset_config("desk").dim


def test_none_overrides_ignored(tmp_path):
    cfg = load_config(None, overrides={"coarse_n": None, "seed": 5})
    assert cfg.coarse_n == 256
    assert cfg.seed == 5


def test_unknown_key_rejected(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text("corse_n: 64\n")
    with pytest.raises(ConfigError, match="corse_n"):
        load_config(p)


def test_bad_coercion_message():
    with pytest.raises(ConfigError, match="epochs_coarse"):
        load_config(None, overrides={"epochs_coarse": "notanint"})


def test_string_coercion():
    cfg = load_config(None, overrides={"coarse_n": "128", "lr_coarse": "1e-3",
                                       "texture_field": "false"})
    assert cfg.coarse_n == 128
    assert cfg.lr_coarse == 1e-3
    assert cfg.texture_field is False


def test_preset_from_file_with_overrides(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text("preset: paper\ncoarse_n: 512\n")
    cfg = load_config(p)
    assert cfg.preset == "paper"
    assert cfg.coarse_n == 512        # file override on top of the preset
    assert cfg.input_res == 256       # inherited from the preset


def test_validation():
    with pytest.raises(ConfigError):
        TrainConfig(coarse_n=0)
    with pytest.raises(ConfigError):
        TrainConfig(lr_warmup_epochs=50, epochs_coarse=10)
    with pytest.raises(ConfigError):
        TrainConfig(elevation_min=60.0, elevation_max=-10.0)


def test_save_roundtrip(tmp_path):
    cfg = TrainConfig(seed=11, coarse_n=64)
    p = tmp_path / "saved.yaml"
    save_config(cfg, p)
    back = load_config(p)
    assert config_dict(back) == config_dict(cfg)


def test_stage1_lr_warmup_and_floor():
    cfg = TrainConfig(epochs_coarse=40, lr_warmup_epochs=4, lr_coarse=3e-4)
    # linear warmup hits the peak at the last warmup epoch
    assert stage1_lr(cfg, 0) == pytest.approx(3e-4 / 4)
    assert stage1_lr(cfg, 3) == pytest.approx(3e-4)
    # monotone decay after warmup, never below the 25% floor
    prev = stage1_lr(cfg, 4)
    for e in range(5, 40):
        cur = stage1_lr(cfg, e)
        assert cur <= prev + 1e-15
        prev = cur
    assert stage1_lr(cfg, 39) >= 0.25 * 3e-4 - 1e-12
    assert stage1_lr(cfg, 39) == pytest.approx(0.25 * 3e-4, rel=0.05)


def test_stage1_weights_endpoints():
    cfg = TrainConfig(epochs_coarse=40, lr_warmup_epochs=4,
                      chamfer_start=2.0, chamfer_end=0.2,
                      render_start=1.0, render_end=10.0)
    assert stage1_weights(cfg, 0) == (2.0, 1.0)
    assert stage1_weights(cfg, 4) == (2.0, 1.0)          # held through warmup
    assert stage1_weights(cfg, 39) == (0.2, 10.0)        # exact at last epoch
    wc_mid, wr_mid = stage1_weights(cfg, 20)
    assert 0.2 < wc_mid < 2.0
    assert 1.0 < wr_mid < 10.0


def test_stage1_weights_single_epoch():
    cfg = TrainConfig(epochs_coarse=1, lr_warmup_epochs=1)
    assert stage1_weights(cfg, 0) == (cfg.chamfer_start, cfg.render_start)
