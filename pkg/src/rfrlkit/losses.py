"""Loss heads: supervised cross-entropy, reconstruction MSE, and the
feature-similarity term, combined by an unweighted sum.

All three are built from taped primitives so one backward pass reaches
every parameter. Heads that are switched off contribute a constant zero
that is not connected to the graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ShapeError
from .model import ForwardTaps, LossSwitches
from .tensor import Tensor, ewise, tabs, tclip, tlog, tmean, tsqrt, tsum

PROB_FLOOR = 1e-7
FRS_KINDS = ("sq", "l1", "l2")


@dataclass
class LossReport:
    l_sup: Tensor
    l_un: Tensor
    l_frs: Tensor
    total: Tensor


def cross_entropy(probs: Tensor, labels: Tensor) -> Tensor:
    """Mean over the batch of -sum(y * log y'), y' floored at 1e-7."""
    if probs.shape != labels.shape or probs.data.ndim != 2:
        raise ShapeError(
            f"cross_entropy expects matching (B,c), got {probs.shape} "
            f"vs {labels.shape}")
    ld = labels.data
    if not (np.isin(ld, (0.0, 1.0)).all() and (ld.sum(axis=1) == 1.0).all()):
        raise ContractError("labels must be one-hot rows")
    rowsum = probs.data.sum(axis=1)
    if np.abs(rowsum - 1.0).max() > 1e-5:
        raise ContractError(
            f"probability rows must sum to 1 within 1e-5, worst "
            f"{rowsum[np.abs(rowsum - 1.0).argmax()]:.6f}")
    batch = probs.shape[0]
    picked = ewise("mul", labels, tlog(tclip(probs, PROB_FLOOR, 1.0)))
    return ewise("mul", tsum(picked), -1.0 / batch)


def mse(x: Tensor, x_rec: Tensor) -> Tensor:
    """Mean over every element (batch included) of squared differences."""
    if x.shape != x_rec.shape:
        raise ShapeError(f"mse shapes disagree: {x.shape} vs {x_rec.shape}")
    d = ewise("sub", x, x_rec)
    return tmean(ewise("mul", d, d))


def _pair_distance(e: Tensor, d: Tensor, kind: str) -> Tensor:
    diff = ewise("sub", e, d)
    if kind == "sq":
        return tmean(ewise("mul", diff, diff))
    if kind == "l1":
        return tmean(tabs(diff))
    if kind == "l2":
        # root mean square over the whole tensor pair as given; for a
        # batched pair the value is defined per batch, not per sample
        return tsqrt(tmean(ewise("mul", diff, diff)))
    raise ContractError(f"unknown feature-distance kind '{kind}'")


def frs_loss(enc_feats: list[Tensor], dec_feats: list[Tensor],
             kind: str = "sq") -> Tensor:
    """Mean over stage pairs of a per-element feature distance.

    Pairs encoder stage i with dec_feats[N-1-i]; the default distance is
    the mean of squared differences (size-normalized squared Frobenius),
    with 'l1' (mean absolute) and 'l2' (root mean square) variants for
    the ablation harness. 'sq' and 'l1' average per element, so batched
    evaluations are independent of the batch split; 'l2' takes the root
    after pooling, so its readout is defined per evaluated batch.
    """
    n_pairs = len(enc_feats)
    if len(dec_feats) != n_pairs:
        raise ShapeError(
            f"feature lists disagree in length: {n_pairs} vs {len(dec_feats)}")
    if n_pairs == 0:
        raise ShapeError("feature lists are empty")
    total = None
    for i in range(n_pairs):
        e, d = enc_feats[i], dec_feats[n_pairs - 1 - i]
        if e.shape != d.shape:
            raise ShapeError(
                f"feature pair {i} shapes disagree: {e.shape} vs {d.shape}")
        p = _pair_distance(e, d, kind)
        total = p if total is None else ewise("add", total, p)
    return ewise("mul", total, 1.0 / n_pairs)


def total_loss(taps: ForwardTaps, x: Tensor, labels: Tensor,
               switches: LossSwitches, frs_kind: str = "sq") -> LossReport:
    """Unweighted sum of the enabled heads; disabled heads are an exact,
    graph-free zero."""
    zero = Tensor(np.zeros((), dtype=x.dtype))
    l_sup = cross_entropy(taps.probs, labels) if switches.supervised else zero
    l_un = mse(x, taps.recon) if switches.unsupervised else zero
    l_frs = (frs_loss(taps.enc_feats, taps.dec_feats, frs_kind)
             if switches.frs else zero)
    total = None
    for head in (l_sup, l_un, l_frs):
        if head is zero:
            continue
        total = head if total is None else ewise("add", total, head)
    if total is None:
        total = zero
    return LossReport(l_sup=l_sup, l_un=l_un, l_frs=l_frs, total=total)
