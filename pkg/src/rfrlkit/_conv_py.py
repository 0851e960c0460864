"""Pure numpy convolution kernels (im2col + GEMM).

All three primitives share one lowering: a (B, C, k, k, Ho, Wo) patch
buffer built from k*k strided slices of the zero-padded input, so the
heavy arithmetic runs through np.matmul. The input-gradient kernel runs
the same slicing in reverse as a scatter; each (i, j) tap writes a
stride-s slice whose elements are distinct, so += is safe per tap.

Convention: correlation (no kernel flip), zero padding of k // 2 on both
sides, output extent ceil(extent / stride).
"""

from __future__ import annotations

import numpy as np


def _out_extent(n: int, stride: int) -> int:
    return -(-n // stride)


def _pad(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _im2col(xp: np.ndarray, k: int, stride: int, ho: int, wo: int) -> np.ndarray:
    b, c = xp.shape[:2]
    cols = np.empty((b, c, k, k, ho, wo), dtype=xp.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = xp[:, :, i:i + stride * ho:stride,
                                  j:j + stride * wo:stride]
    return cols


def conv_fwd(x: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    """x (B,C,H,W) correlated with w (O,C,k,k) -> (B,O,Ho,Wo)."""
    b, c, h, wid = x.shape
    o, _, k, _ = w.shape
    ho, wo = _out_extent(h, stride), _out_extent(wid, stride)
    cols = _im2col(_pad(x, k // 2), k, stride, ho, wo)
    lhs = w.reshape(o, c * k * k)
    rhs = cols.reshape(b, c * k * k, ho * wo)
    return np.matmul(lhs, rhs).reshape(b, o, ho, wo)


def conv_bwd_input(gy: np.ndarray, w: np.ndarray, stride: int,
                   in_hw: tuple[int, int]) -> np.ndarray:
    """Adjoint of conv_fwd in its input: gy (B,O,Ho,Wo) -> (B,C,H,W)."""
    b, o, ho, wo = gy.shape
    _, c, k, _ = w.shape
    h, wid = in_hw
    pad = k // 2
    lhs = w.reshape(o, c * k * k)
    cols = np.matmul(lhs.T, gy.reshape(b, o, ho * wo))
    cols = cols.reshape(b, c, k, k, ho, wo)
    dxp = np.zeros((b, c, h + 2 * pad, wid + 2 * pad), dtype=gy.dtype)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i:i + stride * ho:stride,
                j:j + stride * wo:stride] += cols[:, :, i, j]
    if pad == 0:
        return dxp
    return np.ascontiguousarray(dxp[:, :, pad:pad + h, pad:pad + wid])


def conv_bwd_weight(gy: np.ndarray, x: np.ndarray, stride: int,
                    k: int) -> np.ndarray:
    """Adjoint of conv_fwd in its weight: -> (O,C,k,k)."""
    b, o, ho, wo = gy.shape
    c = x.shape[1]
    cols = _im2col(_pad(x, k // 2), k, stride, ho, wo)
    rhs = cols.reshape(b, c * k * k, ho * wo).transpose(0, 2, 1)
    gw = np.matmul(gy.reshape(b, o, ho * wo), rhs).sum(axis=0)
    return np.ascontiguousarray(gw.reshape(o, c, k, k))
