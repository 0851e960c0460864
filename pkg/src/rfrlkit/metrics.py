"""Confusion matrix and macro-averaged accuracy / sensitivity /
specificity (one-vs-rest per class, then mean over classes)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ContractError


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (c, c) int64, rows true class, cols predicted

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])

    def total(self) -> int:
        return int(self.counts.sum())


def confusion(preds, labels, num_classes: int) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64).ravel()
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if preds.shape != labels.shape:
        raise ContractError(
            f"preds and labels lengths disagree: {preds.size} vs {labels.size}")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    if preds.size:
        if preds.min() < 0 or preds.max() >= num_classes:
            raise ContractError("prediction index out of range")
        if labels.min() < 0 or labels.max() >= num_classes:
            raise ContractError("label index out of range")
        np.add.at(counts, (labels, preds), 1)
    return ConfusionMatrix(counts=counts)


def metrics(cm: ConfusionMatrix) -> tuple[float, float, float]:
    """(accuracy, sensitivity, specificity), each the mean over classes
    of the one-vs-rest value; classes with a zero denominator are left
    out of that metric's mean (with a warning).

    The per-class rates and their means are formed in exact rational
    arithmetic (the inputs are integer counts) and rounded to float
    once at the end, so e.g. the mean of 4/5 and 9/10 comes back as
    the double nearest 17/20 rather than picking up an extra rounding
    from the intermediate sum.
    """
    counts = cm.counts
    total = int(counts.sum())
    if total == 0:
        raise ContractError("empty confusion matrix")
    accs: list[Fraction] = []
    sens: list[Fraction] = []
    specs: list[Fraction] = []
    for k in range(cm.num_classes):
        tp = int(counts[k, k])
        fn = int(counts[k].sum()) - tp
        fp = int(counts[:, k].sum()) - tp
        tn = total - tp - fn - fp
        accs.append(Fraction(tp + tn, total))
        if tp + fn > 0:
            sens.append(Fraction(tp, tp + fn))
        else:
            warnings.warn(f"class {k} has no true samples; "
                          "skipped in sensitivity")
        if tn + fp > 0:
            specs.append(Fraction(tn, tn + fp))
        else:
            warnings.warn(f"class {k} has no negative samples; "
                          "skipped in specificity")

    def mean(vals: list[Fraction]) -> float:
        if not vals:
            return 0.0
        return float(sum(vals, Fraction(0)) / len(vals))

    return mean(accs), mean(sens), mean(specs)


CSV_HEADER = "run_id,split,accuracy,sensitivity,specificity"


def csv_row(run_id: str, split_name: str, acc: float, sen: float,
            spe: float) -> str:
    return f"{run_id},{split_name},{acc:.6f},{sen:.6f},{spe:.6f}"
