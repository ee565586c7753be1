"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime failure (reported on stderr
as ``ERROR:<module>:<message>``).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .config import CKPT_DIR_ENV, TrainConfig, dump_config, load_config
from .errors import InferenceError, RetargetError, SeamError

log = logging.getLogger("retarget")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _rect(text: str):
    from .imaging import Rect

    try:
        values = [int(v) for v in text.replace(" ", "").split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LEFT,TOP,WIDTH,HEIGHT, got {text!r}") from None
    if len(values) != 4:
        raise argparse.ArgumentTypeError(f"expected LEFT,TOP,WIDTH,HEIGHT, got {text!r}")
    return Rect(*values)


def _seed(args) -> None:
    import torch

    torch.manual_seed(args.seed)
    np.random.seed(args.seed % 2**32)


# -- subcommands ------------------------------------------------------------------

def cmd_prepare_data(args) -> int:
    from .data import load_dataset, sample_pair
    from .imaging import crop_valid, save_image

    index = load_dataset(args.data, args.provider, args.canvas)
    print(f"samples\t{len(index)}\nskipped\t{index.skipped}")
    if args.dump:
        out = Path(args.out)
        for i in range(min(args.dump, len(index))):
            pair = sample_pair(index, i, args.seed)
            stem = out / pair.sample_id
            save_image(crop_valid(pair.model_input[:3], pair.input_valid), f"{stem}_input.png")
            save_image(crop_valid(pair.model_input[3:], pair.gt_valid), f"{stem}_mask.png")
            save_image(crop_valid(pair.ground_truth, pair.gt_valid), f"{stem}_gt.png")
        print(f"dumped\t{min(args.dump, len(index))}\t{out}")
    return 0


def cmd_train(args) -> int:
    from .data import load_dataset
    from .train import train

    overrides = {f.name: getattr(args, f.name) for f in fields(TrainConfig)}
    if args.data is not None:
        overrides["dataset_root"] = args.data
    cfg = load_config(args.config, **overrides)
    if not cfg.dataset_root:
        raise UsageError("train: a dataset root is required (--data or dataset_root in --config)")
    index = load_dataset(cfg.dataset_root, cfg.provider, cfg.canvas)
    cfg.checkpoint_dir.mkdir(parents=True, exist_ok=True)
    (cfg.checkpoint_dir / "config.cfg").write_text(dump_config(cfg))
    path = train(index, cfg, resume=args.resume, max_steps=args.max_steps)
    print(path)
    return 0


def _annotation(args, image):
    from .data import get_model_provider
    from .inference import annotation_from_bbox, annotation_from_mask_file

    if args.mask_file:
        return annotation_from_mask_file(image, args.mask_file)
    if args.bbox:
        return annotation_from_bbox(image, args.bbox)
    return get_model_provider(args.provider)


def cmd_retarget(args) -> int:
    from .imaging import Rect, load_image, save_image
    from .inference import retarget
    from .masks import RetargetSpec

    _seed(args)
    try:
        image = load_image(args.input)
    except OSError as exc:
        raise InferenceError(f"cannot read {args.input}: {exc}") from exc
    ckpt = args.ckpt or Path(os.environ.get(CKPT_DIR_ENV, "checkpoints")) / "latest.ckpt"
    obj = (args.object_left, args.object_top, args.object_width, args.object_height)
    if any(v is not None for v in obj) and not all(v is not None for v in obj):
        raise UsageError("retarget: --object-left/-top/-width/-height must be given together")
    spec = RetargetSpec(args.width, args.height, Rect(*obj)) if obj[0] is not None else None
    try:
        ann = _annotation(args, image)
    except RetargetError as exc:
        raise InferenceError(f"no object found ({exc}); pass --bbox or --mask-file") from exc
    out, mask = retarget(image, spec, ckpt, ann, target_size=(args.width, args.height), return_mask=True)
    save_image(out, args.output)
    if args.dump_masks:
        from .imaging import crop_valid

        save_image(crop_valid(mask.data, mask.valid), Path(args.dump_masks) / f"{Path(args.output).stem}_mask.png")
    return 0


def cmd_seam_carve(args) -> int:
    from .imaging import load_image, save_image
    from .seam import seam_retarget

    _seed(args)
    try:
        image = load_image(args.input)
    except OSError as exc:
        raise SeamError(f"cannot read {args.input}: {exc}") from exc
    save_image(seam_retarget(image, args.width, args.height, height_first=args.height_first), args.output)
    return 0


def cmd_evaluate(args) -> int:
    from .data import load_dataset, sample_pair
    from .evaluation import comparison_grid, full_reference, log_psnr, score_no_reference
    from .imaging import crop_valid, resize_image
    from .seam import seam_retarget

    index = load_dataset(args.data, args.provider, args.canvas)
    generator = None
    if args.ckpt:
        import torch

        from .train import load_checkpoint

        state = load_checkpoint(args.ckpt)
        generator = state.generator.eval()
        if index.canvas_size != state.config.canvas:
            raise InferenceError("--canvas must match the checkpoint's training canvas")
    rows = ["image\tmethod\ttarget_size\tpsnr\tssim\tnr_score\tscorer_id"]
    for i in range(min(args.n, len(index))):
        pair = sample_pair(index, i, args.seed)
        gt = crop_valid(pair.ground_truth, pair.gt_valid)
        distorted = crop_valid(pair.model_input[:3], pair.input_valid)
        h, w = gt.shape[1:]
        outputs = {
            "resize": resize_image(distorted, h, w),
            "seam-carve": seam_retarget(distorted, w, h),
        }
        if generator is not None:
            with torch.no_grad():
                pred = generator(torch.from_numpy(pair.model_input)[None])[0].numpy()
            outputs["ours"] = crop_valid(pred, pair.gt_valid)
        for method, img in outputs.items():
            p, s = full_reference(img, gt)
            nr = score_no_reference(img, args.scorer)
            rows.append(f"{pair.sample_id}\t{method}\t{w}x{h}\t{log_psnr(p):.4f}\t{s:.4f}\t"
                        f"{nr.score:.6g}\t{nr.scorer_id}@{nr.version}")
        if args.grids:
            entries = [("input", distorted), ("ground truth", gt), *outputs.items()]
            comparison_grid(entries, Path(args.grids) / f"{pair.sample_id}.png")
    text = "\n".join(rows) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_grid(args) -> int:
    from .evaluation import comparison_grid, score_no_reference
    from .imaging import load_image

    entries = []
    for item in args.entry:
        label, sep, path = item.partition("=")
        if not sep:
            raise UsageError(f"grid: --entry expects LABEL=PATH, got {item!r}")
        entries.append((label, load_image(path)))
    scores = [score_no_reference(img, args.scorer).score for _, img in entries] if args.score else None
    comparison_grid(entries, args.output, scores)
    return 0


# -- parser --------------------------------------------------------------------------

def _add_train_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_argument_group("training config (override --config values)")
    for f in fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        kind = type(f.default)
        help_text = f"(default: {f.default!r})"
        if kind is bool:
            group.add_argument(flag, dest=f.name, default=None, metavar="BOOL", help=help_text)
        else:
            group.add_argument(flag, dest=f.name, type=kind, default=None, help=help_text)


def build_parser() -> Parser:
    parser = Parser(prog="retarget", description="Content-aware image retargeting toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=Parser, required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text,
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.add_argument("--seed", type=int, default=0, help="random seed")
        p.set_defaults(func=fn)
        return p

    p = add("prepare-data", cmd_prepare_data, "index a dataset and optionally dump synthesized pairs")
    p.add_argument("--data", required=True, help="dataset root")
    p.add_argument("--provider", default="files", help="annotation provider")
    p.add_argument("--canvas", type=int, default=TrainConfig.canvas)
    p.add_argument("--dump", type=int, default=0, help="write this many synthesized pairs")
    p.add_argument("--out", default="pairs", help="directory for --dump")

    p = sub.add_parser("train", help="train the generator", description="train the generator")
    p.set_defaults(func=cmd_train)
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--data", help="dataset root (alias of --dataset-root)")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.add_argument("--max-steps", type=int, help="stop after this many total steps")
    _add_train_flags(p)

    p = add("retarget", cmd_retarget, "retarget an image with a trained checkpoint")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--ckpt", help=f"checkpoint (default: ${CKPT_DIR_ENV}/latest.ckpt)")
    p.add_argument("--object-left", type=int)
    p.add_argument("--object-top", type=int)
    p.add_argument("--object-width", type=int)
    p.add_argument("--object-height", type=int)
    p.add_argument("--bbox", type=_rect, help="object box LEFT,TOP,WIDTH,HEIGHT (skips the provider)")
    p.add_argument("--mask-file", help="binary object mask PNG (skips the provider)")
    p.add_argument("--provider", default="model", help="annotation plug-in name")
    p.add_argument("--dump-masks", metavar="DIR", help="also write the conditioning mask here")

    p = add("seam-carve", cmd_seam_carve, "seam-carving baseline")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--height-first", action="store_true", help="run the height pass before the width pass")

    p = add("evaluate", cmd_evaluate, "score methods on synthesized pairs")
    p.add_argument("--data", required=True)
    p.add_argument("--provider", default="files")
    p.add_argument("--canvas", type=int, default=TrainConfig.canvas)
    p.add_argument("--ckpt")
    p.add_argument("--n", type=int, default=8, help="number of images")
    p.add_argument("--scorer", default="sharpness")
    p.add_argument("--out", help="results table path (default: stdout)")
    p.add_argument("--grids", metavar="DIR", help="write a comparison grid per image")

    p = add("grid", cmd_grid, "side-by-side comparison sheet")
    p.add_argument("--entry", action="append", required=True, metavar="LABEL=PATH")
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--score", action="store_true", help="print no-reference scores under labels")
    p.add_argument("--scorer", default="sharpness")
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except RetargetError as exc:
        print(f"ERROR:{exc.module}:{exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"ERROR:cli:{exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())
