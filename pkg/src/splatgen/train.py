"""Staged training: coarse warmup, frozen-coarse super-resolution, joint.

Stage 1 trains the coarse generator under a ramped mix of attribute
Chamfer (against cached pseudo labels) and rendering loss.  Stage 2
freezes the coarse generator bitwise and trains only the SR module on
rendering loss over its upsampled output.  Stage 3 unfreezes everything
and fine-tunes jointly at a low learning rate, still supervising the SR
renders.

Each iteration takes one object, conditions on its azimuth-normalized
input view, picks supervision views from the object's fixed camera pool,
and steps Adam once.  Ground-truth views are float renders of the dense
surface set through the same rasterizer the model uses.
"""

from __future__ import annotations

import json
import shutil
from pathlib import Path

import numpy as np

from .cameras import orbit
from .coarse import CoarseGenerator
from .config import TrainConfig, config_dict, save_config, stage1_lr, stage1_weights
from .errors import CheckpointMismatch
from .gaussians import GaussianSet, canonical_scale
from .labels import fit_pseudo_label, has_label, read_label, write_label
from .losses import LossWeights, chamfer_attribute_loss, psnr, rendering_loss
from .nn import ParamStore, load_checkpoint, save_checkpoint
from .render import render_tensor
from .superres import SRModule
from .synth import (
    INPUT_ELEVATION,
    SyntheticObject,
    generate_synthetic_object,
    render_views,
    sample_cameras,
    write_object,
)

STAGE_FILES = {1: "stage1.ntc", 2: "stage2.ntc", 3: "stage3.ntc"}
FINAL_FILE = "final.ntc"


def train_object_seeds(cfg: TrainConfig) -> list[int]:
    return list(range(cfg.n_objects))


def holdout_object_seeds(cfg: TrainConfig) -> list[int]:
    return [1000 + i for i in range(cfg.n_holdout)]


def coarse_scale_of(cfg: TrainConfig) -> float:
    return canonical_scale(cfg.coarse_n)


def fine_scale_of(cfg: TrainConfig) -> float:
    return canonical_scale(cfg.coarse_n * cfg.sr_factor)


# -- models -------------------------------------------------------------------

def build_models(cfg: TrainConfig):
    """Fresh coarse and SR models in separate parameter stores."""
    coarse_store = ParamStore()
    gen = CoarseGenerator(
        coarse_store,
        np.random.default_rng([7, cfg.seed]),
        image_size=cfg.input_res,
        patch_size=cfg.patch_size,
        dim=cfg.dim,
        heads=cfg.heads,
        encoder_blocks=cfg.encoder_blocks,
        geometry_blocks=cfg.geometry_blocks,
        texture_blocks=cfg.texture_blocks,
        n_gaussians=cfg.coarse_n,
        plane_res=cfg.plane_res,
        plane_feat=cfg.plane_feat,
        plane_patch=cfg.plane_patch,
        decode_hidden=cfg.decode_hidden,
        texture_field=cfg.texture_field,
    )
    sr_store = ParamStore()
    sr = SRModule(
        sr_store,
        np.random.default_rng([11, cfg.seed]),
        factor=cfg.sr_factor,
        width=cfg.sr_width,
        grid=cfg.sr_grid,
        heads=cfg.heads,
        image_dim=cfg.dim,
    )
    return coarse_store, sr_store, gen, sr


def save_models(path, cfg: TrainConfig, coarse_store: ParamStore, sr_store: ParamStore,
                extra: dict | None = None) -> None:
    tensors = {f"coarse.{k}": v for k, v in coarse_store.state_dict().items()}
    tensors.update({f"sr.{k}": v for k, v in sr_store.state_dict().items()})
    meta = {"config": config_dict(cfg)}
    meta.update(extra or {})
    save_checkpoint(path, tensors, meta)


def load_models(path):
    """Rebuild models from a checkpoint -> (cfg, stores, gen, sr, extra)."""
    tensors, extra = load_checkpoint(path)
    from .config import load_config
    raw = dict(extra.get("config") or {})
    if not raw:
        raise CheckpointMismatch(f"checkpoint {path} carries no config")
    cfg = load_config(None, raw)
    coarse_store, sr_store, gen, sr = build_models(cfg)
    coarse_store.load_state_dict(
        {k[len("coarse."):]: v for k, v in tensors.items() if k.startswith("coarse.")}
    )
    sr_store.load_state_dict(
        {k[len("sr."):]: v for k, v in tensors.items() if k.startswith("sr.")}
    )
    return cfg, coarse_store, sr_store, gen, sr, extra


# -- data ---------------------------------------------------------------------

def pool_cameras(cfg: TrainConfig, obj_seed: int):
    """(input camera, supervision cameras) for an object's fixed view pool."""
    input_cam = orbit(0.0, INPUT_ELEVATION, cfg.radius, cfg.input_res, cfg.input_res)
    sup = sample_cameras(
        cfg.disk_views,
        (cfg.elevation_min, cfg.elevation_max),
        cfg.radius,
        seed=obj_seed,
        width=cfg.render_res,
        height=cfg.render_res,
    )[1:]
    return input_cam, sup


def ensure_dataset(cfg: TrainConfig, seeds=None) -> list[str]:
    """Write any missing objects under data_dir; returns their ids."""
    root = Path(cfg.data_dir)
    ids = []
    for seed in seeds if seeds is not None else train_object_seeds(cfg) + holdout_object_seeds(cfg):
        obj = generate_synthetic_object(seed)
        ids.append(obj.object_id)
        if (root / "objects" / obj.object_id / "spec").exists():
            continue
        input_cam, sup = pool_cameras(cfg, seed)
        cams = [input_cam] + sup
        write_object(root, obj, cams, render_views(obj, cams))
    return ids


def label_init(obj: SyntheticObject, n: int):
    """Label initialization: n surface samples with their colors."""
    rng = np.random.default_rng([41, obj.seed])
    pick = rng.choice(obj.surface_points.shape[0], size=n, replace=False)
    return obj.surface_points[pick], obj.surface_colors[pick]

def ensure_labels(cfg: TrainConfig, seeds=None, verbose: bool = False) -> dict[str, GaussianSet]:
    """Fit any missing pseudo labels; return all of them keyed by object id."""
    labels_dir = Path(cfg.data_dir) / "labels"
    out: dict[str, GaussianSet] = {}
    for seed in seeds if seeds is not None else train_object_seeds(cfg):
        obj = generate_synthetic_object(seed)
        if not has_label(labels_dir, obj.object_id):
            input_cam, sup = pool_cameras(cfg, seed)
            cams = [input_cam] + sup
            if cfg.label_views and cfg.label_views < len(cams):
                idx = np.linspace(0, len(cams) - 1, cfg.label_views).round().astype(int)
                cams = [cams[i] for i in idx]
            views = render_views(obj, cams)
            init_mu, init_col = label_init(obj, cfg.coarse_n)
            label, report = fit_pseudo_label(
                list(zip(cams, views)),
                init_mu,
                init_colors=init_col,
                scale=coarse_scale_of(cfg),
                max_iters=cfg.label_iters,
                lr=cfg.label_lr,
                weights=LossWeights(omega1=cfg.omega1),
            )
            write_label(labels_dir, obj.object_id, label, report)
            if verbose:
                print(f"label {obj.object_id}: {report.iterations} iters, "
                      f"psnr {report.initial_psnr:.1f}->{report.final_psnr:.1f}")
        out[obj.object_id] = read_label(labels_dir, obj.object_id)
    return out


class ViewPool:
    """Per-object cache of the input view and supervision views (float)."""

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self._cache = {}

    def get(self, seed: int):
        if seed not in self._cache:
            obj = generate_synthetic_object(seed)
            input_cam, sup = pool_cameras(self.cfg, seed)
            input_view = render_views(obj, [input_cam])[0]
            sup_views = render_views(obj, sup)
            self._cache[seed] = (obj, input_view, sup, sup_views)
        return self._cache[seed]


# -- training -----------------------------------------------------------------

def _mean_render_loss(pred_tensors, scale, cams, gts, cfg, log_psnr: bool):
    """(loss tensor, mean psnr or None) of rendering pred at each camera."""
    from . import nn
    weights = LossWeights(omega1=cfg.omega1)
    total = None
    psnrs = []
    for cam, gt in zip(cams, gts):
        out = render_tensor(pred_tensors.means, pred_tensors.colors,
                            pred_tensors.opacities, scale, cam)
        gt_arr = gt.as_array()
        term = rendering_loss(out, gt_arr, weights)
        total = term if total is None else total + term
        if log_psnr:
            psnrs.append(psnr(out.data[:, :, 0:3], gt_arr[:, :, 0:3]))
    loss = total / float(len(cams))
    return loss, (float(np.mean(psnrs)) if psnrs else None)


def train(cfg: TrainConfig, verbose: bool = False) -> dict:
    """Run the three stages; resumes at stage granularity from out_dir."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out_dir / "config.yaml")
    metrics_path = out_dir / "metrics.jsonl"

    coarse_store, sr_store, gen, sr = build_models(cfg)
    done_stage = 0
    done_iters = 0
    first_render = None
    for k in (3, 2, 1):
        if (out_dir / STAGE_FILES[k]).exists():
            _, coarse_store, sr_store, gen, sr, extra = load_models(out_dir / STAGE_FILES[k])
            done_stage = k
            done_iters = int(extra.get("iterations", 0))
            first_render = extra.get("initial_render_loss")
            break

    seeds = train_object_seeds(cfg)
    ensure_dataset(cfg)
    labels = ensure_labels(cfg, verbose=verbose)
    pool = ViewPool(cfg)
    log_f = metrics_path.open("a")
    c_scale, f_scale = coarse_scale_of(cfg), fine_scale_of(cfg)
    chamfer_w = LossWeights(w1=cfg.chamfer_w1, w2=cfg.chamfer_w2)
    iteration = done_iters  # monotone across resumed stages
    last_epoch_renders: list[float] = []

    def log(row: dict) -> None:
        log_f.write(json.dumps(row) + "\n")
        log_f.flush()

    def pick_views(stage: int, epoch: int, idx: int, sup, sup_views):
        r = np.random.default_rng([cfg.seed, 17 + stage, epoch, idx])
        k = min(cfg.views_per_iter, len(sup))
        sel = r.choice(len(sup), size=k, replace=False)
        return [sup[i] for i in sel], [sup_views[i] for i in sel]

    def run_stage(stage: int, epochs: int, lr_of, step):
        nonlocal iteration, first_render
        for epoch in range(epochs):
            epoch_renders = []
            for idx, seed in enumerate(seeds):
                obj, input_view, sup, sup_views = pool.get(seed)
                cams, gts = pick_views(stage, epoch, idx, sup, sup_views)
                iteration += 1
                want_psnr = (iteration % cfg.log_psnr_every) == 0
                row = step(epoch, obj, input_view, cams, gts, want_psnr)
                row.update({"iteration": iteration, "stage": stage, "epoch": epoch,
                            "object": obj.object_id, "lr": lr_of(epoch)})
                log(row)
                epoch_renders.append(row["loss_render"])
                if verbose:
                    extras = f" psnr={row['psnr']:.2f}" if "psnr" in row else ""
                    print(f"stage {stage} epoch {epoch} it {iteration}: "
                          f"loss={row['loss']:.4f} render={row['loss_render']:.4f}{extras}")
            if first_render is None:
                # baseline for the improvement summary: the mean over the
                # whole first epoch, not a single lucky first batch
                first_render = float(np.mean(epoch_renders))
            last_epoch_renders[:] = epoch_renders

    # stage 1: coarse, chamfer + render ramp
    def step1(epoch, obj, input_view, cams, gts, want_psnr):
        w_c, w_r = stage1_weights(cfg, epoch)
        out = gen.forward(input_view.rgb)
        chamfer = chamfer_attribute_loss(out, labels[obj.object_id], chamfer_w)
        render, ps = _mean_render_loss(out, c_scale, cams, gts, cfg, want_psnr)
        loss = w_c * chamfer + w_r * render
        loss.backward()
        coarse_store.adam_step(stage1_lr(cfg, epoch))
        coarse_store.zero_grad()
        row = {"loss": loss.data.item(), "loss_render": render.data.item(),
               "loss_chamfer": chamfer.data.item(), "w_chamfer": w_c, "w_render": w_r}
        if ps is not None:
            row["psnr"] = ps
        return row

    if done_stage < 1:
        run_stage(1, cfg.epochs_coarse, lambda e: stage1_lr(cfg, e), step1)
        save_models(out_dir / STAGE_FILES[1], cfg, coarse_store, sr_store,
                    {"stage": 1, "iterations": iteration, "initial_render_loss": first_render})

    # stage 2: SR only, coarse frozen (bitwise)
    def step23(epoch, obj, input_view, cams, gts, want_psnr, lr, stores):
        out, feats = gen.forward(input_view.rgb, return_features=True)
        fine = sr.forward(out, feats, c_scale)
        render, ps = _mean_render_loss(fine, f_scale, cams, gts, cfg, want_psnr)
        render.backward()
        for s in stores:
            s.adam_step(lr)
            s.zero_grad()
        row = {"loss": render.data.item(), "loss_render": render.data.item()}
        if ps is not None:
            row["psnr"] = ps
        return row

    if done_stage < 2:
        coarse_store.freeze()
        run_stage(2, cfg.epochs_sr,
                  lambda e: cfg.lr_sr,
                  lambda *a: step23(*a, lr=cfg.lr_sr, stores=(sr_store,)))
        coarse_store.unfreeze()
        save_models(out_dir / STAGE_FILES[2], cfg, coarse_store, sr_store,
                    {"stage": 2, "iterations": iteration, "initial_render_loss": first_render})

    # stage 3: joint fine-tune at low lr, still supervising SR renders
    if done_stage < 3:
        run_stage(3, cfg.epochs_joint,
                  lambda e: cfg.lr_joint,
                  lambda *a: step23(*a, lr=cfg.lr_joint, stores=(coarse_store, sr_store)))
        save_models(out_dir / STAGE_FILES[3], cfg, coarse_store, sr_store,
                    {"stage": 3, "iterations": iteration, "initial_render_loss": first_render})
        shutil.copyfile(out_dir / STAGE_FILES[3], out_dir / FINAL_FILE)

    log_f.close()
    summary_path = out_dir / "summary.json"
    if iteration == done_iters and summary_path.exists():
        return json.loads(summary_path.read_text())  # nothing new ran
    summary = {
        "out_dir": str(out_dir),
        "final_checkpoint": str(out_dir / FINAL_FILE),
        "iterations": iteration,
        "initial_render_loss": first_render,
        "final_render_loss": (float(np.mean(last_epoch_renders)) if last_epoch_renders else None),
    }
    summary_path.write_text(json.dumps(summary, indent=2))
    return summary
