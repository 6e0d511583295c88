"""Command-line entry points.

Subcommands: gen-data, fit-labels, train, infer, render, gradcheck, eval.
Every TrainConfig key is a --flag on the commands that take a config;
flags override the config file, which overrides the preset.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .config import TrainConfig, load_config
from .errors import SplatError

_CONFIG_KEYS = [f.name for f in fields(TrainConfig)]


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="flat YAML config file")
    for key in _CONFIG_KEYS:
        p.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None,
                       help=argparse.SUPPRESS)


def _config_from(args) -> TrainConfig:
    overrides = {k: getattr(args, k) for k in _CONFIG_KEYS if getattr(args, k, None) is not None}
    return load_config(args.config, overrides)


def _cmd_gen_data(args) -> int:
    from .train import ensure_dataset
    cfg = _config_from(args)
    ids = ensure_dataset(cfg)
    print(f"dataset ready under {cfg.data_dir}: {len(ids)} objects")
    return 0


def _cmd_fit_labels(args) -> int:
    from .train import ensure_labels
    cfg = _config_from(args)
    labels = ensure_labels(cfg, verbose=True)
    print(f"{len(labels)} pseudo labels cached under {Path(cfg.data_dir) / 'labels'}")
    return 0


def _cmd_train(args) -> int:
    from .train import train
    cfg = _config_from(args)
    summary = train(cfg, verbose=not args.quiet)
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_infer(args) -> int:
    from .infer import infer
    result = infer(args.checkpoint, args.image, out_dir=args.out,
                   turntable=args.turntable)
    t = result.timings
    print(f"gaussians: {len(result.gaussians)}")
    print(f"timing (s): coarse={t['coarse']:.3f} sr={t['sr']:.3f} "
          f"render={t['render']:.3f} total={t['total']:.3f}")
    print(f"forward passes: {result.forward_passes}, optimizer steps: {result.adam_calls}")
    if result.ply_path:
        print(f"wrote {result.ply_path} and {len(result.turntable_paths)} turntable views")
    return 0


def _cmd_render(args) -> int:
    from .cameras import orbit
    from .ply_io import import_ply
    from .render import rasterize
    gset = import_ply(args.ply)
    cam = orbit(args.azimuth, args.elevation, args.radius, args.size, args.size)
    img = rasterize(gset, cam)
    out = Path(args.out)
    img.save_png(out)
    print(f"wrote {out} ({len(gset)} gaussians, azimuth={args.azimuth}, elevation={args.elevation})")
    return 0


def _cmd_gradcheck(args) -> int:
    from .render import gradcheck
    reports = []
    for k in range(args.scenes):
        rep = gradcheck(seed=args.seed + k)
        reports.append(rep)
        print(f"scene {args.seed + k}: {'PASS' if rep['pass'] else 'FAIL'} "
              f"max_rel_err={rep['max_rel_err']:.2e} n={rep['n_gaussians']}")
    ok = all(r["pass"] for r in reports)
    print(f"gradcheck: {'PASS' if ok else 'FAIL'} ({len(reports)} scenes)")
    return 0 if ok else 1


def _cmd_eval(args) -> int:
    from .evaluate import evaluate
    seeds = [int(s) for s in args.objects.split(",")] if args.objects else None
    result = evaluate(args.checkpoint, variant=args.variant, object_seeds=seeds,
                      n_views=args.views, verbose=True)
    print(json.dumps(result, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splatgen",
                                description="single-image 3D Gaussian generation")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write the synthetic dataset")
    _add_config_flags(g)
    g.set_defaults(fn=_cmd_gen_data)

    f = sub.add_parser("fit-labels", help="fit pseudo-label Gaussians per object")
    _add_config_flags(f)
    f.set_defaults(fn=_cmd_fit_labels)

    t = sub.add_parser("train", help="run the three training stages")
    _add_config_flags(t)
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(fn=_cmd_train)

    i = sub.add_parser("infer", help="single image -> gaussians + turntable")
    i.add_argument("--checkpoint", required=True)
    i.add_argument("--image", required=True)
    i.add_argument("--out", default="infer_out")
    i.add_argument("--turntable", type=int, default=8)
    i.set_defaults(fn=_cmd_infer)

    r = sub.add_parser("render", help="render a PLY from an orbit camera")
    r.add_argument("--ply", required=True)
    r.add_argument("--azimuth", type=float, default=0.0)
    r.add_argument("--elevation", type=float, default=15.0)
    r.add_argument("--radius", type=float, default=2.2)
    r.add_argument("--size", type=int, default=256)
    r.add_argument("--out", default="render.png")
    r.set_defaults(fn=_cmd_render)

    c = sub.add_parser("gradcheck", help="finite-difference check of the renderer")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--scenes", type=int, default=1)
    c.set_defaults(fn=_cmd_gradcheck)

    e = sub.add_parser("eval", help="held-out metrics (perceptual column is a proxy)")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--variant", default="full",
                   choices=("full", "no_sr", "no_texture_field"))
    e.add_argument("--objects", default=None,
                   help="comma-separated object seeds (default: holdout set)")
    e.add_argument("--views", type=int, default=6)
    e.set_defaults(fn=_cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SplatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
