"""Loss-head ablation: train matched variants and compare in- and
out-of-distribution test metrics across seeds.

Variants share the data and the initial parameters for a given seed
(initialization never depends on which loss heads are enabled), so every
difference in the table comes from the training objective:

  classifier          supervised head only
  classifier_decoder  supervised + reconstruction
  full                supervised + reconstruction + feature similarity
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .config import ExperimentConfig
from .model import LossSwitches
from .train import run_train

VARIANTS: list[tuple[str, LossSwitches]] = [
    ("classifier", LossSwitches(supervised=True, unsupervised=False, frs=False)),
    ("classifier_decoder", LossSwitches(supervised=True, unsupervised=True,
                                        frs=False)),
    ("full", LossSwitches(supervised=True, unsupervised=True, frs=True)),
]
BASELINE = "classifier"
SPLITS = ("test", "ood")

ROWS_HEADER = "variant,seed,split,accuracy,sensitivity,specificity"
SUMMARY_HEADER = ("variant,split,median_accuracy,median_sensitivity,"
                  "median_specificity,delta_accuracy_vs_baseline")


@dataclass
class AblationResult:
    rows: list[tuple[str, int, str, float, float, float]] = field(
        default_factory=list)
    medians: dict[tuple[str, str], tuple[float, float, float]] = field(
        default_factory=dict)
    deltas: dict[tuple[str, str], float] = field(default_factory=dict)


def run_ablation(cfg: ExperimentConfig, seeds: list[int], out_dir=None,
                 quiet: bool = True) -> AblationResult:
    out = os.fspath(out_dir or cfg.out_dir)
    os.makedirs(out, exist_ok=True)
    result = AblationResult()
    per_cell: dict[tuple[str, str], list[tuple[float, float, float]]] = {}

    for seed in seeds:
        for variant, switches in VARIANTS:
            run_cfg = replace(cfg.with_switches(switches), seed=seed,
                              out_dir=os.path.join(out, f"{variant}-seed{seed}"))
            record = run_train(run_cfg, quiet=quiet)
            for split_name in SPLITS:
                triple = record.final[split_name]
                result.rows.append((variant, seed, split_name, *triple))
                per_cell.setdefault((variant, split_name), []).append(triple)

    for key, triples in per_cell.items():
        arr = np.array(triples, dtype=np.float64)
        result.medians[key] = tuple(np.median(arr, axis=0).tolist())
    for (variant, split_name), med in result.medians.items():
        base = result.medians[(BASELINE, split_name)]
        result.deltas[(variant, split_name)] = med[0] - base[0]

    _write_tables(out, result)
    return result


def _write_tables(out: str, result: AblationResult) -> None:
    lines = [ROWS_HEADER]
    for variant, seed, split_name, acc, sen, spe in result.rows:
        lines.append(f"{variant},{seed},{split_name},"
                     f"{acc:.6f},{sen:.6f},{spe:.6f}")
    with open(os.path.join(out, "ablate.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

    lines = [SUMMARY_HEADER]
    for variant, _ in VARIANTS:
        for split_name in SPLITS:
            med = result.medians[(variant, split_name)]
            delta = result.deltas[(variant, split_name)]
            lines.append(f"{variant},{split_name},{med[0]:.6f},{med[1]:.6f},"
                         f"{med[2]:.6f},{delta:+.6f}")
    with open(os.path.join(out, "ablate_summary.csv"), "w",
              encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def summary_text(result: AblationResult) -> str:
    lines = [SUMMARY_HEADER]
    for variant, _ in VARIANTS:
        for split_name in SPLITS:
            med = result.medians[(variant, split_name)]
            delta = result.deltas[(variant, split_name)]
            lines.append(f"{variant},{split_name},{med[0]:.6f},{med[1]:.6f},"
                         f"{med[2]:.6f},{delta:+.6f}")
    return "\n".join(lines)
