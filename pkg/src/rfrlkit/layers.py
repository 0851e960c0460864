"""Differentiable layers on top of the tensor tape.

Convolutions delegate their heavy arithmetic to the selected kernel
backend; everything here just wires forwards to hand-derived backwards.
Convolution is correlation (no kernel flip) with zero padding of
floor(k / 2) and output extent ceil(extent / stride). The transposed
convolution is the exact adjoint of a strided convolution, so its
forward runs the input-gradient kernel and its backward reuses the
forward and weight-gradient kernels with the roles swapped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import ContractError, ShapeError
from .tensor import Tensor, op_result


@dataclass
class Conv2dParams:
    weight: Tensor  # (out_ch, in_ch, k, k)
    bias: Tensor    # (out_ch,)
    stride: int = 1


@dataclass
class ConvT2dParams:
    weight: Tensor  # (in_ch, out_ch, k, k)
    bias: Tensor    # (out_ch,)
    stride: int = 2


def conv2d(x: Tensor, p: Conv2dParams) -> Tensor:
    if x.data.ndim != 4:
        raise ShapeError(f"conv2d input must be (B,C,H,W), got {x.shape}")
    wd = p.weight.data
    if wd.ndim != 4 or wd.shape[2] != wd.shape[3]:
        raise ShapeError(f"conv2d weight must be (O,C,k,k), got {p.weight.shape}")
    if wd.shape[2] % 2 == 0:
        raise ContractError(f"conv2d kernel extent must be odd, got {wd.shape[2]}")
    if x.shape[2] < wd.shape[2] or x.shape[3] < wd.shape[2]:
        raise ShapeError(
            f"conv2d input {x.shape[2]}x{x.shape[3]} smaller than kernel "
            f"{wd.shape[2]}")
    if x.shape[1] != wd.shape[1]:
        raise ShapeError(
            f"conv2d channels disagree: input {x.shape[1]}, weight {wd.shape[1]}")
    if p.bias.shape != (wd.shape[0],):
        raise ShapeError(f"conv2d bias must be ({wd.shape[0]},), got {p.bias.shape}")
    xd = x.data
    stride = p.stride
    k = wd.shape[2]
    h, w = xd.shape[2], xd.shape[3]
    out = backend.conv_fwd(xd, wd, stride) + p.bias.data[None, :, None, None]

    def vjp(g):
        return (backend.conv_bwd_input(g, wd, stride, (h, w)),
                backend.conv_bwd_weight(g, xd, stride, k),
                g.sum(axis=(0, 2, 3)))

    return op_result(out, "conv2d", (x, p.weight, p.bias), vjp)


def conv2d_transpose(x: Tensor, p: ConvT2dParams) -> Tensor:
    """Upsample by the stride factor: (B,Ci,H,W) -> (B,Co,s*H,s*W)."""
    if x.data.ndim != 4:
        raise ShapeError(f"conv2d_transpose input must be (B,C,H,W), got {x.shape}")
    wd = p.weight.data
    if wd.ndim != 4 or wd.shape[2:] != (3, 3):
        raise ShapeError(
            f"conv2d_transpose weight must be (Ci,Co,3,3), got {p.weight.shape}")
    if p.stride != 2:
        raise ContractError(
            f"conv2d_transpose stride is fixed to 2, got {p.stride}")
    if x.shape[1] != wd.shape[0]:
        raise ShapeError(
            f"conv2d_transpose channels disagree: input {x.shape[1]}, "
            f"weight {wd.shape[0]}")
    if p.bias.shape != (wd.shape[1],):
        raise ShapeError(
            f"conv2d_transpose bias must be ({wd.shape[1]},), got {p.bias.shape}")
    xd = x.data
    stride = p.stride
    k = wd.shape[2]
    out_hw = (stride * xd.shape[2], stride * xd.shape[3])
    out = backend.conv_bwd_input(xd, wd, stride, out_hw)
    out = out + p.bias.data[None, :, None, None]

    def vjp(g):
        return (backend.conv_fwd(g, wd, stride),
                backend.conv_bwd_weight(xd, g, stride, k),
                g.sum(axis=(0, 2, 3)))

    return op_result(out, "conv2d_transpose", (x, p.weight, p.bias), vjp)


def relu(x: Tensor) -> Tensor:
    xd = x.data
    mask = xd > 0

    def vjp(g):
        return (g * mask,)

    return op_result(np.where(mask, xd, 0), "relu", (x,), vjp)


def sigmoid(x: Tensor) -> Tensor:
    xd = x.data
    # split by sign so neither branch exponentiates a large positive value
    pos = xd >= 0
    e = np.exp(np.where(pos, -xd, xd))
    s = np.where(pos, 1.0 / (1.0 + e), e / (1.0 + e)).astype(xd.dtype)

    def vjp(g):
        return (g * s * (1.0 - s),)

    return op_result(s, "sigmoid", (x,), vjp)


def softmax(x: Tensor) -> Tensor:
    """Row-wise softmax over the last axis of a (B, K) tensor."""
    if x.data.ndim != 2:
        raise ShapeError(f"softmax expects (B,K), got {x.shape}")
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        inner = (g * p).sum(axis=1, keepdims=True)
        return (p * (g - inner),)

    return op_result(p, "softmax", (x,), vjp)


def global_avg_pool(x: Tensor) -> Tensor:
    """(B,C,H,W) -> (B,C) spatial mean."""
    if x.data.ndim != 4:
        raise ShapeError(f"global_avg_pool expects (B,C,H,W), got {x.shape}")
    xd = x.data
    area = xd.shape[2] * xd.shape[3]

    def vjp(g):
        return (np.broadcast_to(g[:, :, None, None] / area, xd.shape).astype(
            xd.dtype, copy=True),)

    return op_result(xd.mean(axis=(2, 3)), "global_avg_pool", (x,), vjp)


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map (B,F) @ (F,U) + (U,)."""
    if x.data.ndim != 2 or weight.data.ndim != 2:
        raise ShapeError(f"dense expects 2-D operands, got {x.shape} @ {weight.shape}")
    if x.shape[1] != weight.shape[0]:
        raise ShapeError(
            f"dense feature dims disagree: {x.shape} vs weight {weight.shape}")
    if bias.shape != (weight.shape[1],):
        raise ShapeError(f"dense bias must be ({weight.shape[1]},), got {bias.shape}")
    xd, wd = x.data, weight.data
    out = xd @ wd + bias.data

    def vjp(g):
        return g @ wd.T, xd.T @ g, g.sum(axis=0)

    return op_result(out, "dense", (x, weight, bias), vjp)
