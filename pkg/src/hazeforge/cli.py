"""Command-line entry points: gen-toy, train, infer, eval, dcp, hda.

The HAZEFORGE_THREADS environment variable caps worker threads for the
per-image batch commands; output ordering is always name-sorted and
deterministic regardless of worker completion order.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import dcp as dcp_mod
from .config import TrainConfig, load_config
from .datasets import generate_toy
from .imaging import Image, load_image, save_image
from .metrics import MetricReport, psnr, ssim
from .mutual import run_training, student_from_checkpoint
from .nn import infer_image
from .scatter import hda_rebuild


def _worker_count() -> int:
    raw = os.environ.get("HAZEFORGE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_files(fn, items):
    """Run fn over items, possibly threaded, preserving input order."""
    workers = _worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _list_images(path):
    if os.path.isdir(path):
        names = sorted(
            n for n in os.listdir(path) if n.lower().endswith((".png", ".ppm"))
        )
        if not names:
            raise FileNotFoundError(f"no images found in {path}")
        return [(n, os.path.join(path, n)) for n in names]
    return [(os.path.basename(path), path)]


def cmd_gen_toy(args) -> int:
    generate_toy(args.out, n_images=args.n_images, size=args.size, seed=args.seed)
    print(f"wrote toy dataset: {args.out} (n={args.n_images}, size={args.size}, seed={args.seed})")
    return 0


def cmd_train(args) -> int:
    cfg = TrainConfig()
    if args.config:
        cfg = load_config(args.config, base=cfg)
    if args.seed is not None:
        cfg = TrainConfig(**{**cfg.__dict__, "seed": args.seed})
    if args.epochs is not None:
        cfg = TrainConfig(**{**cfg.__dict__, "epochs": args.epochs})
    result = run_training(cfg, args.data, args.out)
    for key, value in result["validation"].items():
        print(f"{key}={value}")
    print(f"checkpoint={result['final_checkpoint']}")
    return 0


def cmd_infer(args) -> int:
    net = student_from_checkpoint(args.checkpoint)
    os.makedirs(args.out, exist_ok=True)
    items = _list_images(args.input)

    def run(item):
        name, path = item
        img = load_image(path)
        out = np.clip(infer_image(net, img.data), 0.0, 1.0)
        save_image(Image(out), os.path.join(args.out, name))
        return name

    for name in _map_files(run, items):
        print(f"dehazed={name}")
    return 0


def cmd_eval(args) -> int:
    names_a = {n for n, _ in _list_images(args.dir_a)}
    names_b = {n for n, _ in _list_images(args.dir_b)}
    shared = sorted(names_a & names_b)
    if not shared:
        raise FileNotFoundError(f"no matching filenames between {args.dir_a} and {args.dir_b}")
    report = MetricReport()

    def run(name):
        a = load_image(os.path.join(args.dir_a, name))
        b = load_image(os.path.join(args.dir_b, name))
        return name, psnr(a, b), ssim(a, b)

    for name, p, s in _map_files(run, shared):
        report.add(name, p, s)
    for line in report.lines():
        print(line)
    return 0


def cmd_dcp(args) -> int:
    items = _list_images(args.input)
    to_dir = os.path.isdir(args.input)
    if to_dir:
        os.makedirs(args.out, exist_ok=True)

    def run(item):
        name, path = item
        out = dcp_mod.dcp_dehaze(load_image(path), patch=args.patch, omega=args.omega)
        dest = os.path.join(args.out, name) if to_dir else args.out
        save_image(out, dest)
        return name

    for name in _map_files(run, items):
        print(f"dehazed={name}")
    return 0


def cmd_hda(args) -> int:
    if args.p <= 0:
        raise ValueError(f"density factor must be positive, got {args.p}")
    hazy = load_image(args.hazy)
    dehazed = load_image(args.dehazed)
    a = dcp_mod.estimate_airlight(hazy)
    t = dcp_mod.estimate_transmission(hazy, a)
    if args.sweep:
        stem, ext = os.path.splitext(args.out)
        for p in (0.5, 0.8, 1.0, 1.2, 1.4):
            out = hda_rebuild(dehazed, t, a, p)
            path = f"{stem}_p{p}{ext or '.png'}"
            save_image(out, path)
            print(f"rebuilt={path}")
    else:
        save_image(hda_rebuild(dehazed, t, a, args.p), args.out)
        print(f"rebuilt={args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hazeforge",
        description="Teacher-student dehazing with haze density augmentation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-toy", help="generate a deterministic toy dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-images", type=int, default=16)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gen_toy)

    p = sub.add_parser("train", help="run the mutual-learning trainer")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--data", required=True, help="dataset root directory")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("infer", help="dehaze images with the EMA student")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="image file or directory")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("eval", help="PSNR/SSIM between two directories")
    p.add_argument("dir_a")
    p.add_argument("dir_b")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("dcp", help="classical dark-channel-prior dehazer")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--patch", type=int, default=25)
    p.add_argument("--omega", type=float, default=0.95)
    p.set_defaults(fn=cmd_dcp)

    p = sub.add_parser("hda", help="rebuild a hazy image at a chosen density")
    p.add_argument("--hazy", required=True)
    p.add_argument("--dehazed", required=True)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--sweep", action="store_true",
                   help="write outputs for p in {0.5, 0.8, 1.0, 1.2, 1.4}")
    p.set_defaults(fn=cmd_hda)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as e:  # uniform nonzero exit, no partial silent output
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
