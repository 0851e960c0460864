"""Synthetic layered-image dataset with a controllable distribution
shift, plus directory ingestion, augmentation, and deterministic splits.

Three classes share a horizontally banded backbone (retina-like layer
stack): class 0 is bands only, class 1 carves one dark elliptical blob
into the stack (fluid analog), class 2 displaces the band boundaries
sinusoidally (drusen-like bumps). The shifted variant doubles the noise,
remaps contrast, and draws thicker bands; it plays the role of a second
acquisition setup for robustness evaluation.

Every random draw comes from a counter-based portable generator keyed by
(seed, image index), so datasets are bit-identical across platforms and
insensitive to generation order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, ContractError, DatasetError
from .imageops import affine_warp, bilinear_resize, read_pgm, write_pgm
from .rng import PortableRng

OOD_SIGMA_FACTOR = 2.0
OOD_THICKNESS_SHIFT = 3
# out-of-distribution contrast remap: each image is renormalized to a
# random target mean and gain, the way a differently calibrated scanner
# reports the same anatomy at unrelated absolute intensities
OOD_MEAN_LO = 0.35
OOD_MEAN_SPAN = 0.30
OOD_GAIN_LO = 0.55
OOD_GAIN_SPAN = 0.30

# in-distribution band brightness depends on the class (step per class
# below), so absolute intensity is predictive in ID data but useless
# after the OOD remap; the band geometry stays valid in both
BAND_LEVEL_BASE = 0.45
BAND_LEVEL_STEP = 0.15
BAND_LEVEL_SPAN = 0.45


@dataclass(frozen=True)
class SyntheticSpec:
    classes: int = 3
    image_size: int = 32
    per_class: int = 100
    noise_sigma: float = 0.06
    thickness_lo: int = 3
    thickness_hi: int = 7
    shift: str = "none"  # "none" or "ood"

    def validate(self) -> None:
        if self.classes != 3:
            raise ConfigError("the generator defines exactly 3 classes")
        if self.image_size < 8:
            raise ConfigError(f"image_size too small: {self.image_size}")
        if self.per_class < 1:
            raise ConfigError("per_class must be positive")
        if not 0 < self.thickness_lo <= self.thickness_hi:
            raise ConfigError("bad thickness range")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if self.shift not in ("none", "ood"):
            raise ConfigError(f"unknown shift '{self.shift}'")


class Sample(NamedTuple):
    image: np.ndarray  # (C, S, S) float32 in [0, 1]
    label: int


@dataclass
class Dataset:
    images: np.ndarray  # (N, C, S, S) float32 in [0, 1]
    labels: np.ndarray  # (N,) int64

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(images=self.images[idx], labels=self.labels[idx])

    def one_hot(self, num_classes: int) -> np.ndarray:
        eye = np.eye(num_classes, dtype=np.float32)
        return eye[self.labels]


def _band_profile(rng: PortableRng, size: int, t_lo: int, t_hi: int,
                  level_lo: float) -> np.ndarray:
    """Stack of constant-intensity horizontal bands, top to bottom."""
    prof = np.zeros(size, dtype=np.float64)
    row = 0
    while row < size:
        t = t_lo + int(rng.integers(t_hi - t_lo + 1, ()))
        prof[row:row + t] = level_lo + BAND_LEVEL_SPAN * float(rng.uniform(()))
        row += t
    return prof


def _make_image(rng: PortableRng, label: int, spec: SyntheticSpec) -> np.ndarray:
    s = spec.image_size
    t_lo, t_hi = spec.thickness_lo, spec.thickness_hi
    sigma = spec.noise_sigma
    if spec.shift == "ood":
        t_lo += OOD_THICKNESS_SHIFT
        t_hi += OOD_THICKNESS_SHIFT
        sigma *= OOD_SIGMA_FACTOR
    level_lo = BAND_LEVEL_BASE - BAND_LEVEL_STEP * label
    prof = _band_profile(rng, s, t_lo, t_hi, level_lo)

    if label == 2:
        amp = 3.0 + 2.5 * float(rng.uniform(()))
        freq = 1.5 + 2.0 * float(rng.uniform(()))
        phase = 2.0 * np.pi * float(rng.uniform(()))
        cols = np.arange(s, dtype=np.float64)
        disp = amp * np.sin(2.0 * np.pi * freq * cols / s + phase)
        query = np.arange(s, dtype=np.float64)[:, None] - disp[None, :]
        img = np.interp(query.ravel(), np.arange(s, dtype=np.float64),
                        prof).reshape(s, s)
    else:
        img = np.broadcast_to(prof[:, None], (s, s)).copy()

    if label == 1:
        cr = (0.3 + 0.4 * float(rng.uniform(()))) * s
        cc = (0.3 + 0.4 * float(rng.uniform(()))) * s
        ra = (0.15 + 0.12 * float(rng.uniform(()))) * s
        rb = (0.15 + 0.12 * float(rng.uniform(()))) * s
        rr, ccg = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
        inside = (((rr - cr) / ra) ** 2 + ((ccg - cc) / rb) ** 2) <= 1.0
        img = np.where(inside, img * 0.2, img)

    if sigma > 0:
        img = img + sigma * rng.normal((s, s))
    if spec.shift == "ood":
        mean = OOD_MEAN_LO + OOD_MEAN_SPAN * float(rng.uniform(()))
        gain = OOD_GAIN_LO + OOD_GAIN_SPAN * float(rng.uniform(()))
        img = mean + gain * (img - img.mean())
    return np.clip(img, 0.0, 1.0)


def synth_generate(spec: SyntheticSpec, seed: int) -> Dataset:
    """Balanced dataset, labels interleaved 0,1,2,0,1,2,..."""
    spec.validate()
    n = spec.classes * spec.per_class
    root = PortableRng(seed).child(0x646174)
    images = np.empty((n, 1, spec.image_size, spec.image_size),
                      dtype=np.float32)
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        label = i % spec.classes
        img = _make_image(root.child(i), label, spec)
        images[i, 0] = img.astype(np.float32)
        labels[i] = label
    return Dataset(images=images, labels=labels)


def load_dataset(root: str | os.PathLike, image_size: int = 32) -> Dataset:
    """Directory-per-class tree of binary PGMs -> dataset, classes in
    sorted directory order, images resized to image_size."""
    root = os.fspath(root)
    try:
        entries = os.listdir(root)
    except OSError as exc:
        raise DatasetError(f"cannot read dataset root {root}: {exc}") from exc
    class_dirs = sorted(d for d in entries
                        if os.path.isdir(os.path.join(root, d)))
    if not class_dirs:
        raise DatasetError(f"no class directories under {root}")
    images = []
    labels = []
    for label, dname in enumerate(class_dirs):
        dpath = os.path.join(root, dname)
        files = sorted(f for f in os.listdir(dpath)
                       if f.lower().endswith(".pgm"))
        if not files:
            raise DatasetError(f"class directory {dpath} has no PGM images")
        for fname in files:
            img = read_pgm(os.path.join(dpath, fname))
            if img.shape != (image_size, image_size):
                img = bilinear_resize(img, (image_size, image_size))
            images.append(np.clip(img, 0.0, 1.0).astype(np.float32)[None])
            labels.append(label)
    return Dataset(images=np.stack(images, axis=0),
                   labels=np.asarray(labels, dtype=np.int64))


def export_dataset(ds: Dataset, root: str | os.PathLike) -> None:
    """Write the directory-per-class PGM layout load_dataset reads."""
    root = os.fspath(root)
    for c in np.unique(ds.labels):
        os.makedirs(os.path.join(root, f"class_{int(c)}"), exist_ok=True)
    for i in range(len(ds)):
        dst = os.path.join(root, f"class_{int(ds.labels[i])}",
                           f"img_{i:05d}.pgm")
        write_pgm(dst, ds.images[i, 0].astype(np.float64))


@dataclass(frozen=True)
class AugmentConfig:
    flip_p: float = 0.5
    rotation_deg: float = 15.0
    zoom_lo: float = 0.9
    zoom_hi: float = 1.1
    width_shift_frac: float = 0.1
    height_shift_frac: float = 0.1

    def validate(self) -> None:
        if not 0.0 <= self.flip_p <= 1.0:
            raise ConfigError(f"flip_p out of [0,1]: {self.flip_p}")
        if self.rotation_deg < 0:
            raise ConfigError("rotation_deg must be non-negative")
        if not 0.0 < self.zoom_lo <= self.zoom_hi:
            raise ConfigError("bad zoom range")
        if self.width_shift_frac < 0 or self.height_shift_frac < 0:
            raise ConfigError("shift fractions must be non-negative")


def augment_image(img: np.ndarray, cfg: AugmentConfig,
                  rng: PortableRng) -> np.ndarray:
    """Flip/rotate/zoom/shift with bilinear resampling and zero fill.
    Exactly five draws per call regardless of which knobs are active, so
    the random stream stays aligned across configurations."""
    c, h, w = img.shape
    draws = rng.uniform((5,))
    flip = bool(draws[0] < cfg.flip_p)
    angle = (2.0 * draws[1] - 1.0) * cfg.rotation_deg
    zoom = cfg.zoom_lo + draws[2] * (cfg.zoom_hi - cfg.zoom_lo)
    dx = (2.0 * draws[3] - 1.0) * cfg.width_shift_frac * w
    dy = (2.0 * draws[4] - 1.0) * cfg.height_shift_frac * h
    out = np.empty_like(img)
    for ch in range(c):
        warped = affine_warp(img[ch].astype(np.float64), flip, angle, zoom,
                             dx, dy)
        out[ch] = np.clip(warped, 0.0, 1.0).astype(img.dtype)
    return out


def augment(s: Sample, cfg: AugmentConfig, rng: PortableRng) -> Sample:
    return Sample(image=augment_image(s.image, cfg, rng), label=s.label)


@dataclass(frozen=True)
class Holdout:
    train: float = 0.8
    val: float = 0.1
    test: float = 0.1


@dataclass(frozen=True)
class KFold:
    k: int = 5


def _class_perms(ds: Dataset, seed: int) -> list[np.ndarray]:
    rng = PortableRng(seed).child(0x73706C69)
    out = []
    for c in np.unique(ds.labels):
        idx = np.flatnonzero(ds.labels == c)
        out.append(idx[rng.child(int(c)).permutation(len(idx))])
    return out


def split(ds: Dataset, scheme, seed: int):
    """Stratified deterministic partitions.

    Holdout -> {"train": Dataset, "val": Dataset, "test": Dataset};
    KFold   -> list of k disjoint fold Datasets.
    """
    if isinstance(scheme, Holdout):
        total = scheme.train + scheme.val + scheme.test
        if abs(total - 1.0) > 1e-6:
            raise ContractError(f"holdout fractions sum to {total}, not 1")
        parts: dict[str, list[np.ndarray]] = {"train": [], "val": [], "test": []}
        for idx in _class_perms(ds, seed):
            n = len(idx)
            n_tr = int(round(scheme.train * n))
            n_val = int(round(scheme.val * n))
            n_val = min(n_val, n - n_tr)
            parts["train"].append(idx[:n_tr])
            parts["val"].append(idx[n_tr:n_tr + n_val])
            parts["test"].append(idx[n_tr + n_val:])
        return {k: ds.subset(np.sort(np.concatenate(v)))
                for k, v in parts.items()}
    if isinstance(scheme, KFold):
        if scheme.k < 2:
            raise ContractError(f"k must be >= 2, got {scheme.k}")
        folds: list[list[np.ndarray]] = [[] for _ in range(scheme.k)]
        for idx in _class_perms(ds, seed):
            if len(idx) < scheme.k:
                raise DatasetError(
                    f"a class has {len(idx)} samples, fewer than k={scheme.k}")
            for f in range(scheme.k):
                folds[f].append(idx[f::scheme.k])
        return [ds.subset(np.sort(np.concatenate(f))) for f in folds]
    raise ContractError(f"unknown split scheme {scheme!r}")
