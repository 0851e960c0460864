"""Command-line driver.

Subcommands: train, eval, ablate, gradcheck, gradcam, synth.
Exit codes: 0 success, 1 contract/config/format errors, 2 numeric
failures (non-finite values).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .ablate import run_ablation, summary_text
from .config import read_config
from .data import export_dataset
from .errors import ConfigError, NumericsError, RfrlError
from .explain import export_heatmap, gradcam, gradcam_pp
from .gradcheck import report_lines, run_suite
from .imageops import bilinear_resize, read_pgm
from .metrics import CSV_HEADER, csv_row
from .tensor import Tensor
from .train import evaluate, load_model_checkpoint, make_datasets, run_train

_STAGE_OFFSETS = {"n": 0, "n-1": 1, "n-2": 2}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are contract errors: exit 1
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rfrlkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", required=True,
                   choices=["train", "val", "test", "ood"])

    p = sub.add_parser("ablate", help="train loss-head variants and compare")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", required=True,
                   help="comma-separated seed list, e.g. 1,2,3")
    p.add_argument("--out", default=None)

    sub.add_parser("gradcheck", help="finite-difference gradient suite")

    p = sub.add_parser("gradcam", help="class-activation heatmaps")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True, help="PGM image path")
    p.add_argument("--class", dest="class_idx", type=int, required=True)
    p.add_argument("--stage", required=True, choices=list(_STAGE_OFFSETS))
    p.add_argument("--method", required=True, choices=["cam", "campp", "all"])
    p.add_argument("--out", default=".")

    p = sub.add_parser("synth", help="generate the synthetic dataset tree")
    p.add_argument("--spec", required=True, help="config file with data keys")
    p.add_argument("--out", required=True)
    return parser


def _cmd_train(args) -> int:
    cfg = read_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    cfg.validate()
    run_train(cfg)
    return 0


def _cmd_eval(args) -> int:
    cfg, model, _, _, _ = load_model_checkpoint(args.ckpt)
    sets = make_datasets(cfg)
    if args.split not in sets:
        raise ConfigError(
            f"split '{args.split}' is not available for this data source")
    res = evaluate(model, sets[args.split], cfg.frs_kind)
    print(CSV_HEADER)
    print(csv_row(f"eval-seed{cfg.seed}", args.split, res["accuracy"],
                  res["sensitivity"], res["specificity"]))
    return 0


def _cmd_ablate(args) -> int:
    cfg = read_config(args.config)
    if args.out is not None:
        cfg.out_dir = args.out
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"bad seed list: {args.seeds!r}") from None
    if not seeds:
        raise ConfigError("at least one seed is required")
    result = run_ablation(cfg, seeds)
    print(summary_text(result))
    return 0


def _cmd_gradcheck(_args) -> int:
    checks = run_suite()
    for line in report_lines(checks):
        print(line)
    return 0 if all(c.passed for c in checks) else 1


def _cmd_gradcam(args) -> int:
    cfg, model, _, _, _ = load_model_checkpoint(args.ckpt)
    img = read_pgm(args.input)
    size = cfg.image_size
    if img.shape != (size, size):
        img = bilinear_resize(img, (size, size))
    img = np.clip(img, 0.0, 1.0)
    chans = np.repeat(img[None], cfg.in_channels, axis=0)
    x = Tensor(chans[None].astype(np.float32))
    stage_offset = _STAGE_OFFSETS[args.stage]
    methods = {"cam": [("cam", gradcam)], "campp": [("campp", gradcam_pp)],
               "all": [("cam", gradcam), ("campp", gradcam_pp)]}[args.method]
    stem = os.path.splitext(os.path.basename(args.input))[0]
    os.makedirs(args.out, exist_ok=True)
    for name, fn in methods:
        hm = fn(model, x, args.class_idx, stage_offset)
        prefix = os.path.join(args.out,
                              f"{stem}_{name}_{args.stage}_c{args.class_idx}")
        for path in export_heatmap(hm, img, prefix):
            print(path)
    return 0


def _cmd_synth(args) -> int:
    cfg = read_config(args.spec)
    if cfg.data_source != "synthetic":
        raise ConfigError("synth needs a config with data.source = synthetic")
    sets = make_datasets(cfg)
    for name, ds in sets.items():
        dst = os.path.join(args.out, name)
        os.makedirs(dst, exist_ok=True)
        export_dataset(ds, dst)
        print(f"{name}: {len(ds)} images -> {dst}")
    return 0


_DISPATCH = {"train": _cmd_train, "eval": _cmd_eval, "ablate": _cmd_ablate,
             "gradcheck": _cmd_gradcheck, "gradcam": _cmd_gradcam,
             "synth": _cmd_synth}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _DISPATCH[args.command](args)
    except NumericsError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except RfrlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
