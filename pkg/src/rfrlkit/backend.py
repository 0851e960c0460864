"""Convolution kernel backend selection.

Two interchangeable implementations exist: numpy im2col feeding BLAS
matrix multiplies, and compiled direct-loop kernels. At the small,
channel-heavy shapes this project runs, the BLAS path measures faster
across the board (see benchmarks/conv_bench.py), so "auto" selects
numpy. Set RFRL_BACKEND=cython to use the compiled kernels anyway
(raises if the extension is not built) or RFRL_BACKEND=numpy to be
explicit. Both implement the identical contract and are cross-checked
in the test suite, so the choice only moves the wall clock.
"""

from __future__ import annotations

import os

import numpy as np

from . import _conv_py
from .errors import ConfigError

_choice = os.environ.get("RFRL_BACKEND", "auto").strip().lower()

if _choice in ("auto", "", "numpy"):
    _impl = _conv_py
    BACKEND = "numpy"
elif _choice == "cython":
    try:
        from . import _convkernels as _impl
    except ImportError:
        raise ConfigError(
            "RFRL_BACKEND=cython but the compiled extension is missing")
    BACKEND = "cython"
else:
    raise ConfigError(f"unknown RFRL_BACKEND value '{_choice}'")


def _ready(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a)


def conv_fwd(x: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    return np.asarray(_impl.conv_fwd(_ready(x), _ready(w), stride))


def conv_bwd_input(gy: np.ndarray, w: np.ndarray, stride: int,
                   in_hw: tuple[int, int]) -> np.ndarray:
    return np.asarray(_impl.conv_bwd_input(_ready(gy), _ready(w), stride,
                                           tuple(in_hw)))


def conv_bwd_weight(gy: np.ndarray, x: np.ndarray, stride: int,
                    k: int) -> np.ndarray:
    return np.asarray(_impl.conv_bwd_weight(_ready(gy), _ready(x), stride, k))
