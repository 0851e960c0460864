"""Class-activation heatmaps from encoder stage features.

Both methods read a stage's feature maps F and the gradient g of the
selected pre-softmax logit with respect to F, then build a non-negative
map that is max-normalized (an all-zero map stays all-zero, so the
normalized maximum is at most 1).

  plain    : channel weight = spatial mean of g; map = relu(sum w_c F_c)
  plus-plus: gradients are first scaled by 1/max|g| so the closed-form
             pixel coefficients a = g^2 / (2 g^2 + sum_px F * g^3) do not
             depend on the logit's scale; weight = sum_px a * relu(g).

Stages are addressed by how far they sit from the deepest encoder
feature: offset 0 is the deepest stage, 1 the one above it, 2 above
that. Features are taken before any skip projection touches them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .imageops import bilinear_resize, write_pgm
from .model import RfrlModel, forward
from .serialize import write_tensor_file
from .tensor import Tensor, backward, ewise, tsum

STAGE_OFFSETS = (0, 1, 2)


@dataclass
class Heatmap:
    values: np.ndarray   # (h, w), in [0, 1]
    stage_offset: int    # 0 = deepest encoder stage
    class_idx: int


def _normalize(cam: np.ndarray) -> np.ndarray:
    cam = np.maximum(cam, 0.0)
    peak = cam.max()
    if peak > 0:
        cam = cam / peak
    return cam


def gradcam_map(feature: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Core map from one sample's (C,h,w) feature and logit gradient."""
    weights = grad.mean(axis=(1, 2))
    cam = np.tensordot(weights, feature, axes=(0, 0))
    return _normalize(cam)


def gradcam_pp_map(feature: np.ndarray, grad: np.ndarray) -> np.ndarray:
    peak = np.abs(grad).max()
    g = grad / peak if peak > 0 else grad
    g2 = g * g
    g3 = g2 * g
    denom = 2.0 * g2 + (feature * g3).sum(axis=(1, 2), keepdims=True)
    alpha = np.divide(g2, denom, out=np.zeros_like(g2), where=denom != 0)
    weights = (alpha * np.maximum(g, 0.0)).sum(axis=(1, 2))
    cam = np.tensordot(weights, feature, axes=(0, 0))
    return _normalize(cam)


def _stage_gradient(model: RfrlModel, x: Tensor, class_idx: int,
                    stage_offset: int) -> tuple[np.ndarray, np.ndarray]:
    cfg = model.cfg
    if stage_offset not in STAGE_OFFSETS:
        raise ContractError(f"stage offset must be one of {STAGE_OFFSETS}, "
                            f"got {stage_offset}")
    if not 0 <= class_idx < cfg.num_classes:
        raise ContractError(f"class index {class_idx} out of range "
                            f"[0, {cfg.num_classes})")
    if cfg.n_stages - stage_offset < 0:
        raise ContractError(f"model has no stage at offset {stage_offset}")
    taps = forward(model, x)
    feat = taps.enc_feats[cfg.n_stages - stage_offset]
    mask = np.zeros((x.shape[0], cfg.num_classes), dtype=x.dtype)
    mask[:, class_idx] = 1.0
    score = tsum(ewise("mul", taps.logits, Tensor(mask)))
    grads = backward(score)
    if feat in grads:
        g = grads.raw(feat)
    else:
        g = np.zeros_like(feat.data)
    return feat.data[0], g[0]


def gradcam(model: RfrlModel, x: Tensor, class_idx: int,
            stage_offset: int = 0) -> Heatmap:
    feat, grad = _stage_gradient(model, x, class_idx, stage_offset)
    return Heatmap(values=gradcam_map(feat, grad), stage_offset=stage_offset,
                   class_idx=class_idx)


def gradcam_pp(model: RfrlModel, x: Tensor, class_idx: int,
               stage_offset: int = 0) -> Heatmap:
    feat, grad = _stage_gradient(model, x, class_idx, stage_offset)
    return Heatmap(values=gradcam_pp_map(feat, grad),
                   stage_offset=stage_offset, class_idx=class_idx)


def export_heatmap(hm: Heatmap, image: np.ndarray, out_prefix: str) -> list[str]:
    """Write <prefix>.pgm (map at stage resolution), <prefix>_overlay.pgm
    (bilinear upsample blended onto the input), <prefix>.rft (exact
    values). Returns the written paths."""
    vals = hm.values.astype(np.float64)
    paths = []
    write_pgm(f"{out_prefix}.pgm", vals)
    paths.append(f"{out_prefix}.pgm")
    up = bilinear_resize(vals, image.shape)
    overlay = np.clip(0.5 * image + 0.5 * up, 0.0, 1.0)
    write_pgm(f"{out_prefix}_overlay.pgm", overlay)
    paths.append(f"{out_prefix}_overlay.pgm")
    write_tensor_file(f"{out_prefix}.rft", hm.values.astype(np.float32))
    paths.append(f"{out_prefix}.rft")
    return paths
