"""Command-line interface: train / enhance / eval / grid.

Exit codes: 0 success, 1 partial failure, 2 argument or input errors,
3 missing upstream checkpoint, 4 diverged training loss.
"""

import argparse
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import data_io, metrics
from .config import config_to_dict, load_config
from .errors import DivergedLoss, MissingUpstream, R2RError
from .pipeline import enhance_image, load_pipeline
from .trainer import (
    RunLog,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train_stage,
)

_EXTENSIONS = {".png", ".jpg", ".jpeg"}


def _num_workers():
    try:
        return max(1, int(os.environ.get("R2R_NUM_WORKERS", "1")))
    except ValueError:
        return 1


def _write_manifest(path, payload):
    payload = dict(payload)
    payload["end_time"] = time.time()
    tmp = str(path) + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
    os.replace(tmp, path)


def _build_config(args) -> TrainConfig:
    config = TrainConfig()
    if getattr(args, "config", None):
        config = load_config(args.config, config)
    overrides = {}
    for name in ("seed", "epochs", "batch_size", "patch_size"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if "epochs" in overrides:
        overrides.setdefault(
            "lr_decay_epoch", min(config.lr_decay_epoch, overrides["epochs"])
        )
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides)
    return config


def cmd_train(args):
    config = _build_config(args)
    dataset = data_io.load_pair_dataset(args.data)
    upstream = {}
    if args.ckpt_decom:
        upstream["decom"] = load_checkpoint(args.ckpt_decom)
    if args.ckpt_denoise:
        upstream["denoise"] = load_checkpoint(args.ckpt_denoise)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / f"{args.stage}.ckpt"
    log = RunLog(out_dir / f"{args.stage}_train.log", echo=not args.quiet)
    start = time.time()
    try:
        ckpt = train_stage(
            args.stage, dataset, config, upstream=upstream, log=log,
            max_steps=args.steps,
        )
    except MissingUpstream as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except DivergedLoss as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    finally:
        log.close()
    save_checkpoint(ckpt, ckpt_path)
    _write_manifest(out_dir / f"{args.stage}_manifest.json", {
        "command": "train",
        "stage": args.stage,
        "config": config_to_dict(config),
        "checkpoints": {k: str(v) for k, v in {
            "decom": args.ckpt_decom, "denoise": args.ckpt_denoise,
        }.items() if v},
        "dataset_manifest_hash": dataset.manifest_hash,
        "start_time": start,
        "artifacts": [str(ckpt_path)],
    })
    return 0


def _input_files(path):
    path = Path(path)
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix.lower() in _EXTENSIONS)
    return [path]


def _as_rgb(arr):
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    return np.clip(arr, 0.0, 1.0)


def cmd_enhance(args):
    nets = load_pipeline(
        load_checkpoint(args.ckpt_decom),
        load_checkpoint(args.ckpt_denoise),
        load_checkpoint(args.ckpt_relight),
    )
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = _input_files(args.input)
    if not files:
        print(f"error: no images under {args.input}", file=sys.stderr)
        return 2
    start = time.time()
    failures = []
    artifacts = []

    def process(path):
        image = data_io.load_image(path)
        result = enhance_image(image, nets)
        written = []
        stem = path.stem
        data_io.save_image(_as_rgb(result["enhanced"]), out_dir / f"{stem}_enhanced.png")
        written.append(out_dir / f"{stem}_enhanced.png")
        if args.dump_intermediates:
            panels = {
                "reflectance": result["reflectance"],
                "illumination": result["illumination"],
                "denoised_reflectance": result["denoised_reflectance"],
                "enhanced_illumination": result["enhanced_illumination"],
            }
            for name, arr in panels.items():
                target = out_dir / f"{stem}_{name}.png"
                data_io.save_image(_as_rgb(arr), target)
                written.append(target)
        return written

    with ThreadPoolExecutor(max_workers=_num_workers()) as pool:
        futures = {pool.submit(process, p): p for p in files}
        for future, path in futures.items():
            try:
                artifacts.extend(future.result())
            except (R2RError, OSError) as e:
                print(f"failed on {path}: {e}", file=sys.stderr)
                failures.append(str(path))

    _write_manifest(out_dir / "enhance_manifest.json", {
        "command": "enhance",
        "checkpoints": {
            "decom": args.ckpt_decom, "denoise": args.ckpt_denoise,
            "relight": args.ckpt_relight,
        },
        "inputs": [str(p) for p in files],
        "failures": failures,
        "start_time": start,
        "artifacts": [str(p) for p in artifacts],
    })
    return 1 if failures else 0


def cmd_eval(args):
    if args.pred:
        pred_files = {p.stem: p for p in _input_files(args.pred)}
        gt_files = {p.stem: p for p in _input_files(args.gt)}
        missing = sorted(set(pred_files) ^ set(gt_files))
        if missing:
            print(f"error: unmatched filenames: {', '.join(missing)}", file=sys.stderr)
            return 2
        pairs = (
            (stem, data_io.load_image(pred_files[stem]), data_io.load_image(gt_files[stem]))
            for stem in sorted(pred_files)
        )
    else:
        dataset = data_io.load_pair_dataset(args.data)
        nets = load_pipeline(
            load_checkpoint(args.ckpt_decom),
            load_checkpoint(args.ckpt_denoise),
            load_checkpoint(args.ckpt_relight),
        )
        pairs = (
            (pair.id, np.clip(enhance_image(pair.low, nets)["enhanced"], 0, 1), pair.normal)
            for pair in dataset.pairs
        )
    report = metrics.evaluate_pairs(pairs)
    csv_text = report.to_csv()
    if args.output:
        Path(args.output).write_text(csv_text)
    print(csv_text.strip().splitlines()[-1])
    return 0


def cmd_grid(args):
    dirs = [Path(d) for d in args.inputs]
    if len(dirs) > 8:
        print("error: at most 8 input directories", file=sys.stderr)
        return 2
    labels = args.labels or [d.name for d in dirs]
    if len(labels) != len(dirs):
        print("error: label count must match input count", file=sys.stderr)
        return 2
    stem_sets = [{p.stem for p in _input_files(d)} for d in dirs]
    if not stem_sets or stem_sets[0] == set():
        print("error: no images found", file=sys.stderr)
        return 2
    common = set.intersection(*stem_sets)
    union = set.union(*stem_sets)
    if common != union:
        missing = sorted(union - common)
        print(f"error: mismatched stems: {', '.join(missing)}", file=sys.stderr)
        return 2
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    strip = 20
    for stem in sorted(common):
        panels = []
        for d in dirs:
            path = next(p for p in _input_files(d) if p.stem == stem)
            panels.append(Image.open(path).convert("RGB"))
        sizes = {im.size for im in panels}
        if len(sizes) > 1:
            print(f"error: size mismatch for {stem}: {sizes}", file=sys.stderr)
            return 2
        w, h = panels[0].size
        canvas = Image.new("RGB", (w * len(panels), h + strip), "black")
        draw = ImageDraw.Draw(canvas)
        for i, (im, label) in enumerate(zip(panels, labels)):
            canvas.paste(im, (i * w, strip))
            draw.text((i * w + 4, 4), label, fill="white")
        canvas.save(out_dir / f"{stem}_grid.png")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="r2rnet")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one pipeline stage")
    p.add_argument("--stage", required=True, choices=("decom", "denoise", "relight"))
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--ckpt-decom")
    p.add_argument("--ckpt-denoise")
    p.add_argument("--output", default="runs")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--patch-size", dest="patch_size", type=int)
    p.add_argument("--steps", type=int, help="cap on optimizer steps")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="enhance images with trained checkpoints")
    p.add_argument("--input", required=True)
    p.add_argument("--ckpt-decom", required=True)
    p.add_argument("--ckpt-denoise", required=True)
    p.add_argument("--ckpt-relight", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--dump-intermediates", action="store_true")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("eval", help="metric report over paired images")
    p.add_argument("--data")
    p.add_argument("--ckpt-decom")
    p.add_argument("--ckpt-denoise")
    p.add_argument("--ckpt-relight")
    p.add_argument("--pred")
    p.add_argument("--gt")
    p.add_argument("--output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="tile matching images side by side")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--labels", nargs="+")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "eval":
        if bool(args.pred) != bool(args.gt):
            parser.error("--pred and --gt must be given together")
        if not args.pred and not (args.data and args.ckpt_decom
                                  and args.ckpt_denoise and args.ckpt_relight):
            parser.error("eval needs --pred/--gt or --data with all checkpoints")
    try:
        return args.func(args)
    except R2RError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
