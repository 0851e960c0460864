"""Small image utilities: bilinear sampling, affine warps, PGM (P5) I/O.

Sampling works on (H, W) float arrays. Two border policies: clamp (used
for resizing, keeps edges bright) and zero fill (used for augmentation,
matches the out-of-frame reading of shifts and rotations).
"""

from __future__ import annotations

import os

import numpy as np

from .errors import FormatError


def bilinear_sample(img: np.ndarray, rows: np.ndarray, cols: np.ndarray,
                    fill: float | None = None) -> np.ndarray:
    """Sample img at fractional (rows, cols). fill=None clamps coords to
    the frame; a float fills out-of-frame neighbours with that value."""
    h, w = img.shape
    if fill is None:
        rows = np.clip(rows, 0.0, h - 1.0)
        cols = np.clip(cols, 0.0, w - 1.0)
    r0 = np.floor(rows)
    c0 = np.floor(cols)
    fr = rows - r0
    fc = cols - c0
    out = np.zeros(rows.shape, dtype=np.float64)
    for dr, dc, wgt in ((0, 0, (1 - fr) * (1 - fc)), (0, 1, (1 - fr) * fc),
                        (1, 0, fr * (1 - fc)), (1, 1, fr * fc)):
        rr = r0 + dr
        cc = c0 + dc
        valid = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        ri = np.clip(rr, 0, h - 1).astype(np.int64)
        ci = np.clip(cc, 0, w - 1).astype(np.int64)
        vals = img[ri, ci]
        if fill is None:
            out += wgt * vals
        else:
            out += wgt * np.where(valid, vals, fill)
    return out


def bilinear_resize(img: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Resize with half-pixel centers and clamped borders."""
    h, w = img.shape
    ho, wo = out_hw
    rows = (np.arange(ho, dtype=np.float64) + 0.5) * (h / ho) - 0.5
    cols = (np.arange(wo, dtype=np.float64) + 0.5) * (w / wo) - 0.5
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return bilinear_sample(img, rr, cc, fill=None)


def affine_warp(img: np.ndarray, flip: bool, angle_deg: float, zoom: float,
                shift_cols: float, shift_rows: float) -> np.ndarray:
    """One inverse-mapped resample combining flip, rotation about the
    center, zoom, and a translation in pixels; zero fill outside."""
    h, w = img.shape
    rc = (h - 1) / 2.0
    cc = (w - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(h, dtype=np.float64),
                             np.arange(w, dtype=np.float64), indexing="ij")
    # walk the forward chain backwards: shift, zoom, rotation, flip
    rr = rows - rc - shift_rows
    ccs = cols - cc - shift_cols
    rr = rr / zoom
    ccs = ccs / zoom
    th = np.deg2rad(angle_deg)
    src_c = np.cos(th) * ccs + np.sin(th) * rr + cc
    src_r = -np.sin(th) * ccs + np.cos(th) * rr + rc
    if flip:
        src_c = (w - 1) - src_c
    return bilinear_sample(img, src_r, src_c, fill=0.0)


def _read_pgm_token(buf: bytes, pos: int, path: str) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        ch = buf[pos:pos + 1]
        if ch == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FormatError(f"truncated header in {path}")
    return buf[start:pos], pos


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Binary 8-bit PGM -> float array in [0,1]."""
    path = os.fspath(path)
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:2] != b"P5":
        raise FormatError(f"not a binary PGM (P5): {path}")
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _read_pgm_token(buf, pos, path)
        try:
            fields.append(int(tok))
        except ValueError:
            raise FormatError(f"bad header field {tok!r} in {path}") from None
    w, h, maxval = fields
    if w <= 0 or h <= 0:
        raise FormatError(f"bad dimensions {w}x{h} in {path}")
    if not 0 < maxval < 256:
        raise FormatError(f"unsupported maxval {maxval} in {path} (8-bit only)")
    pos += 1  # single whitespace between header and raster
    raster = buf[pos:pos + w * h]
    if len(raster) < w * h:
        raise FormatError(f"truncated raster in {path}")
    img = np.frombuffer(raster, dtype=np.uint8).reshape(h, w)
    return img.astype(np.float64) / maxval


def write_pgm(path: str | os.PathLike, img: np.ndarray) -> None:
    """Float array in [0,1] -> binary 8-bit PGM."""
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    raster = np.round(arr * 255.0).astype(np.uint8)
    h, w = raster.shape
    with open(os.fspath(path), "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(raster.tobytes())
