"""Deterministic end-to-end training and evaluation.

Every random choice (data generation, shuffling, augmentation, init)
flows from the single config seed through the portable generator, so one
(config, seed) pair fixes every artifact byte for byte on a platform.
Wall-clock time is printed to stdout only and never written into CSV
artifacts for that reason.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig, config_to_text, parse_config
from .data import Dataset, Holdout, augment_image, load_dataset, split, synth_generate
from .errors import ConfigError
from .losses import total_loss
from .metrics import CSV_HEADER, confusion, csv_row, metrics
from .model import RfrlModel, build_model, forward
from .optim import Adam, PlateauState, _assign, plateau_update
from .rng import PortableRng, mix64
from .serialize import load_checkpoint, save_checkpoint
from .tensor import Tensor, backward, no_grad

_SPLIT_TAGS = {"train": 0xA1, "val": 0xA2, "test": 0xA3, "ood": 0xA4}
CHECKPOINT_NAME = "best.ckpt"
HISTORY_NAME = "history.csv"
METRICS_NAME = "metrics.csv"

HISTORY_HEADER = ("epoch,train_sup,train_un,train_frs,train_total,"
                  "train_accuracy,"
                  "val_sup,val_un,val_frs,val_total,lr,"
                  "val_accuracy,val_sensitivity,val_specificity")


def split_seed(seed: int, name: str) -> int:
    return mix64(mix64(seed) + _SPLIT_TAGS[name])


def make_datasets(cfg: ExperimentConfig) -> dict[str, Dataset]:
    """train/val/test (+ ood for synthetic sources), deterministic."""
    if cfg.data_source == "synthetic":
        counts = {"train": cfg.train_per_class, "val": cfg.val_per_class,
                  "test": cfg.test_per_class, "ood": cfg.ood_per_class}
        out = {}
        for name, per_class in counts.items():
            shift = "ood" if name == "ood" else "none"
            spec = cfg.synth_spec(shift, per_class)
            out[name] = synth_generate(spec, split_seed(cfg.seed, name))
        return out
    ds = load_dataset(cfg.data_path, cfg.image_size)
    return split(ds, Holdout(0.8, 0.1, 0.1), cfg.seed)


def evaluate(model: RfrlModel, ds: Dataset, frs_kind: str = "sq",
             batch: int = 16) -> dict[str, float]:
    """Loss components plus macro metrics; no parameter updates."""
    cfg = model.cfg
    n = len(ds)
    preds = np.empty(n, dtype=np.int64)
    sums = np.zeros(4, dtype=np.float64)
    one_hot = ds.one_hot(cfg.num_classes)
    with no_grad():
        for lo in range(0, n, batch):
            hi = min(lo + batch, n)
            x = Tensor(ds.images[lo:hi].copy())
            y = Tensor(one_hot[lo:hi].copy())
            taps = forward(model, x)
            rep = total_loss(taps, x, y, cfg.switches, frs_kind)
            preds[lo:hi] = np.argmax(taps.probs.data, axis=1)
            w = hi - lo
            sums += w * np.array([rep.l_sup.item(), rep.l_un.item(),
                                  rep.l_frs.item(), rep.total.item()])
    acc, sen, spe = metrics(confusion(preds, ds.labels, cfg.num_classes))
    l_sup, l_un, l_frs, total = (sums / n).tolist()
    return {"sup": l_sup, "un": l_un, "frs": l_frs, "total": total,
            "accuracy": acc, "sensitivity": sen, "specificity": spe}


@dataclass
class EpochRow:
    epoch: int
    train: tuple[float, float, float, float]
    train_accuracy: float
    val: tuple[float, float, float, float]
    lr: float
    val_metrics: tuple[float, float, float]


@dataclass
class RunRecord:
    epochs: list[EpochRow] = field(default_factory=list)
    final: dict[str, tuple[float, float, float]] = field(default_factory=dict)
    best_epoch: int = 0
    best_val: float = math.inf
    wall_seconds: float = 0.0


def _checkpoint_tensors(model: RfrlModel, opt: Adam, plateau: PlateauState,
                        epoch: int) -> list[tuple[str, np.ndarray]]:
    tensors = [(name, p.data) for name, p in model.named_params()]
    tensors += opt.state_arrays()
    tensors += [("opt.plateau.best", np.float64(plateau.best_val_loss)),
                ("opt.plateau.since", np.float64(plateau.epochs_since_improve)),
                ("meta.epoch", np.float64(epoch))]
    return [(k, np.asarray(a)) for k, a in tensors]


def save_model_checkpoint(path, cfg: ExperimentConfig, model: RfrlModel,
                          opt: Adam, plateau: PlateauState,
                          epoch: int) -> None:
    save_checkpoint(path, config_to_text(cfg),
                    _checkpoint_tensors(model, opt, plateau, epoch))


def load_model_checkpoint(path):
    """-> (cfg, model, optimizer, plateau state, raw tensor dict)."""
    config_text, tensors = load_checkpoint(path)
    cfg = parse_config(config_text)
    model = build_model(cfg.model_config(), cfg.seed)
    for name, p in model.named_params():
        if name not in tensors:
            raise ConfigError(f"checkpoint is missing parameter '{name}'")
        arr = tensors[name]
        if arr.shape != p.data.shape:
            raise ConfigError(
                f"checkpoint parameter '{name}' has shape {arr.shape}, "
                f"model expects {p.data.shape}")
        _assign(p, arr)
    opt = Adam(model.named_params(), lr=cfg.lr)
    if "opt.t" in tensors:
        opt.load_state_arrays(tensors)
    plateau = PlateauState(
        best_val_loss=float(tensors.get("opt.plateau.best", np.inf)),
        epochs_since_improve=int(tensors.get("opt.plateau.since", 0.0)))
    return cfg, model, opt, plateau, tensors


def run_train(cfg: ExperimentConfig, out_dir=None,
              quiet: bool = False) -> RunRecord:
    cfg.validate()
    out = os.fspath(out_dir or cfg.out_dir)
    os.makedirs(out, exist_ok=True)
    started = time.perf_counter()

    sets = make_datasets(cfg)
    mcfg = cfg.model_config()
    model = build_model(mcfg, cfg.seed)
    opt = Adam(model.named_params(), lr=cfg.lr)
    plateau = PlateauState()
    root = PortableRng(cfg.seed)
    shuffle_rng = root.child(0x736875)
    aug_root = root.child(0x617567)
    aug_cfg = cfg.augment_config() if cfg.aug_enabled else None

    train_ds = sets["train"]
    one_hot = train_ds.one_hot(cfg.num_classes)
    n = len(train_ds)
    steps = n // cfg.batch
    if steps == 0:
        raise ConfigError(
            f"batch {cfg.batch} larger than the training set ({n})")

    record = RunRecord()
    ckpt_path = os.path.join(out, CHECKPOINT_NAME)
    for epoch in range(1, cfg.epochs + 1):
        perm = shuffle_rng.child(epoch).permutation(n)
        aug_rng = aug_root.child(epoch)
        sums = np.zeros(4, dtype=np.float64)
        for s in range(steps):
            idx = perm[s * cfg.batch:(s + 1) * cfg.batch]
            imgs = train_ds.images[idx]
            if aug_cfg is not None:
                imgs = np.stack([augment_image(im, aug_cfg, aug_rng)
                                 for im in imgs])
            x = Tensor(imgs)
            y = Tensor(one_hot[idx])
            taps = forward(model, x)
            rep = total_loss(taps, x, y, mcfg.switches, cfg.frs_kind)
            opt.step(backward(rep.total))
            sums += [rep.l_sup.item(), rep.l_un.item(), rep.l_frs.item(),
                     rep.total.item()]
        train_means = tuple((sums / steps).tolist())

        train_acc = evaluate(model, train_ds, cfg.frs_kind)["accuracy"]
        val = evaluate(model, sets["val"], cfg.frs_kind)
        new_lr, plateau = plateau_update(plateau, val["total"], opt.lr)
        opt.lr = new_lr
        row = EpochRow(epoch=epoch, train=train_means,
                       train_accuracy=train_acc,
                       val=(val["sup"], val["un"], val["frs"], val["total"]),
                       lr=opt.lr,
                       val_metrics=(val["accuracy"], val["sensitivity"],
                                    val["specificity"]))
        record.epochs.append(row)
        if val["total"] < record.best_val:
            record.best_val = val["total"]
            record.best_epoch = epoch
            save_model_checkpoint(ckpt_path, cfg, model, opt, plateau, epoch)
        if not quiet:
            print(f"epoch {epoch:3d}  train {train_means[3]:.4f}  "
                  f"val {val['total']:.4f}  acc {val['accuracy']:.3f}  "
                  f"lr {opt.lr:.2e}")

    _write_history(os.path.join(out, HISTORY_NAME), record)

    # final metrics come from the best-validation model
    best_model = load_model_checkpoint(ckpt_path)[1]
    rows = []
    run_id = f"run-seed{cfg.seed}"
    for name in ("train", "val", "test", "ood"):
        if name not in sets:
            continue
        res = evaluate(best_model, sets[name], cfg.frs_kind)
        record.final[name] = (res["accuracy"], res["sensitivity"],
                              res["specificity"])
        rows.append(csv_row(run_id, name, *record.final[name]))
    with open(os.path.join(out, METRICS_NAME), "w", encoding="utf-8") as fh:
        fh.write(CSV_HEADER + "\n" + "\n".join(rows) + "\n")

    record.wall_seconds = time.perf_counter() - started
    if not quiet:
        print(f"best val {record.best_val:.4f} at epoch {record.best_epoch}; "
              f"wall clock {record.wall_seconds:.1f}s")
    return record


def _write_history(path: str, record: RunRecord) -> None:
    lines = [HISTORY_HEADER]
    for r in record.epochs:
        cells = [str(r.epoch)]
        cells += [f"{v:.6f}" for v in r.train]
        cells.append(f"{r.train_accuracy:.6f}")
        cells += [f"{v:.6f}" for v in r.val]
        cells.append(f"{r.lr:.10g}")
        cells += [f"{v:.6f}" for v in r.val_metrics]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
