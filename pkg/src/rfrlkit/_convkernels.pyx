# cython: boundscheck=False, wraparound=False, initializedcheck=False
# cython: cdivision=True, language_level=3
"""Compiled convolution kernels.

Same contract as the numpy versions in _conv_py: correlation with zero
padding of k // 2 and output extent ceil(extent / stride). Loops are
decomposed per kernel tap (i, j) with the valid output range hoisted out
of the hot loop, so the innermost loop is branch free and runs over a
contiguous output row.
"""

import numpy as np

ctypedef fused floating:
    float
    double


cdef inline Py_ssize_t _lo(Py_ssize_t tap, Py_ssize_t pad, Py_ssize_t stride) noexcept:
    # smallest output index whose source index (out*stride - pad + tap) >= 0
    cdef Py_ssize_t v = 0
    while v * stride - pad + tap < 0:
        v += 1
    return v


cdef inline Py_ssize_t _hi(Py_ssize_t tap, Py_ssize_t pad, Py_ssize_t stride,
                           Py_ssize_t n_out, Py_ssize_t n_in) noexcept:
    # one past the largest output index whose source index stays < n_in
    cdef Py_ssize_t v = n_out
    while v > 0 and (v - 1) * stride - pad + tap >= n_in:
        v -= 1
    return v


def conv_fwd(const floating[:, :, :, ::1] x, const floating[:, :, :, ::1] w,
             Py_ssize_t stride):
    cdef Py_ssize_t nb = x.shape[0], nc = x.shape[1]
    cdef Py_ssize_t h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t no = w.shape[0], k = w.shape[2]
    cdef Py_ssize_t pad = k // 2
    cdef Py_ssize_t ho = (h + stride - 1) // stride
    cdef Py_ssize_t wo = (wd + stride - 1) // stride
    if floating is float:
        out_np = np.zeros((nb, no, ho, wo), dtype=np.float32)
    else:
        out_np = np.zeros((nb, no, ho, wo), dtype=np.float64)
    cdef floating[:, :, :, ::1] out = out_np
    cdef Py_ssize_t b, o, c, i, j, oi, oj, ii, ilo, ihi, jlo, jhi
    cdef floating wv
    for b in range(nb):
        for o in range(no):
            for c in range(nc):
                for i in range(k):
                    ilo = _lo(i, pad, stride)
                    ihi = _hi(i, pad, stride, ho, h)
                    for j in range(k):
                        jlo = _lo(j, pad, stride)
                        jhi = _hi(j, pad, stride, wo, wd)
                        wv = w[o, c, i, j]
                        for oi in range(ilo, ihi):
                            ii = oi * stride - pad + i
                            for oj in range(jlo, jhi):
                                out[b, o, oi, oj] = (
                                    out[b, o, oi, oj]
                                    + wv * x[b, c, ii, oj * stride - pad + j])
    return out_np


def conv_bwd_input(const floating[:, :, :, ::1] gy,
                   const floating[:, :, :, ::1] w,
                   Py_ssize_t stride, in_hw):
    cdef Py_ssize_t nb = gy.shape[0], no = gy.shape[1]
    cdef Py_ssize_t ho = gy.shape[2], wo = gy.shape[3]
    cdef Py_ssize_t nc = w.shape[1], k = w.shape[2]
    cdef Py_ssize_t pad = k // 2
    cdef Py_ssize_t h = in_hw[0], wd = in_hw[1]
    if floating is float:
        dx_np = np.zeros((nb, nc, h, wd), dtype=np.float32)
    else:
        dx_np = np.zeros((nb, nc, h, wd), dtype=np.float64)
    cdef floating[:, :, :, ::1] dx = dx_np
    cdef Py_ssize_t b, o, c, i, j, oi, oj, ii, ilo, ihi, jlo, jhi
    cdef floating wv
    for b in range(nb):
        for o in range(no):
            for c in range(nc):
                for i in range(k):
                    ilo = _lo(i, pad, stride)
                    ihi = _hi(i, pad, stride, ho, h)
                    for j in range(k):
                        jlo = _lo(j, pad, stride)
                        jhi = _hi(j, pad, stride, wo, wd)
                        wv = w[o, c, i, j]
                        for oi in range(ilo, ihi):
                            ii = oi * stride - pad + i
                            for oj in range(jlo, jhi):
                                dx[b, c, ii, oj * stride - pad + j] = (
                                    dx[b, c, ii, oj * stride - pad + j]
                                    + wv * gy[b, o, oi, oj])
    return dx_np


def conv_bwd_weight(const floating[:, :, :, ::1] gy,
                    const floating[:, :, :, ::1] x,
                    Py_ssize_t stride, Py_ssize_t k):
    cdef Py_ssize_t nb = gy.shape[0], no = gy.shape[1]
    cdef Py_ssize_t ho = gy.shape[2], wo = gy.shape[3]
    cdef Py_ssize_t nc = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t pad = k // 2
    if floating is float:
        gw_np = np.zeros((no, nc, k, k), dtype=np.float32)
    else:
        gw_np = np.zeros((no, nc, k, k), dtype=np.float64)
    cdef floating[:, :, :, ::1] gw = gw_np
    cdef Py_ssize_t b, o, c, i, j, oi, oj, ii, ilo, ihi, jlo, jhi
    cdef floating acc
    for b in range(nb):
        for o in range(no):
            for c in range(nc):
                for i in range(k):
                    ilo = _lo(i, pad, stride)
                    ihi = _hi(i, pad, stride, ho, h)
                    for j in range(k):
                        jlo = _lo(j, pad, stride)
                        jhi = _hi(j, pad, stride, wo, wd)
                        acc = 0
                        for oi in range(ilo, ihi):
                            ii = oi * stride - pad + i
                            for oj in range(jlo, jhi):
                                acc = acc + (gy[b, o, oi, oj]
                                             * x[b, c, ii, oj * stride - pad + j])
                        gw[o, c, i, j] = gw[o, c, i, j] + acc
    return gw_np
