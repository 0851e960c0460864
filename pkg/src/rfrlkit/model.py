"""Encoder/decoder classifier with attention skip sums.

Layout for n downsampling stages:

  stem  : conv k3 s1 + relu, full resolution feature (stage 0)
  enc i : conv k3 s1 + relu -> conv k3 s2 + relu, halves the extent
  attn i: 1x1 linear conv, depth-preserving projection of encoder stage i
  dec j : transposed conv k3 s2 + no activation, doubles the extent
  recon : 1x1 conv + sigmoid back to image channels
  cls   : global average pool over the deepest stage -> dense -> softmax

Decoding starts from the projected deepest feature and walks back up:

  s_0 = attn[0](enc[n]);  u_j = dec[j](s_j);  s_{j+1} = attn[j+1](enc[n-1-j]) + u_j

The reconstruction head consumes s_n. Feature-similarity training pairs
encoder stage i with the decoder-side feature of the same extent, taken
before the skip sum that would mix the encoder back in: those taps are
[s_0, u_0, .., u_{n-1}], finest last.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ShapeError
from .layers import (Conv2dParams, ConvT2dParams, conv2d, conv2d_transpose,
                     dense, global_avg_pool, relu, sigmoid, softmax)
from .rng import PortableRng
from .tensor import Tensor, ewise

__all__ = ["LossSwitches", "ModelConfig", "EncBlock", "RfrlModel",
           "ForwardTaps", "build_model", "forward", "count_params",
           "param_count"]


@dataclass(frozen=True)
class LossSwitches:
    supervised: bool = True
    unsupervised: bool = True
    frs: bool = True


@dataclass(frozen=True)
class ModelConfig:
    input_shape: tuple[int, int, int] = (1, 32, 32)
    n_stages: int = 3
    stem_channels: int = 8
    stage_channels: tuple[int, ...] = (16, 32, 64)
    num_classes: int = 3
    switches: LossSwitches = field(default_factory=LossSwitches)

    def validate(self) -> None:
        c, h, w = self.input_shape
        n = self.n_stages
        if n < 2:
            raise ConfigError(f"n_stages must be >= 2, got {n}")
        if len(self.stage_channels) != n:
            raise ConfigError(
                f"stage_channels needs {n} entries, got {len(self.stage_channels)}")
        if h % (1 << n) or w % (1 << n):
            raise ConfigError(
                f"input {h}x{w} not divisible by 2^{n}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if c < 1 or self.stem_channels < 1 or min(self.stage_channels) < 1:
            raise ConfigError("channel counts must be positive")

    def widths(self) -> list[int]:
        """Feature depth per stage, index 0 = stem."""
        return [self.stem_channels, *self.stage_channels]


@dataclass
class EncBlock:
    conv1: Conv2dParams  # stride 1
    conv2: Conv2dParams  # stride 2


@dataclass
class RfrlModel:
    cfg: ModelConfig
    stem: Conv2dParams
    enc_blocks: list[EncBlock]
    attn: list[Conv2dParams]          # n+1 depth-preserving 1x1 projections
    dec: list[ConvT2dParams]          # n stride-2 upsamplers
    recon_head: Conv2dParams          # 1x1 back to image channels
    cls_weight: Tensor
    cls_bias: Tensor

    def named_params(self) -> list[tuple[str, Tensor]]:
        out = [("stem.weight", self.stem.weight), ("stem.bias", self.stem.bias)]
        for i, blk in enumerate(self.enc_blocks, start=1):
            out += [(f"enc.{i}.conv1.weight", blk.conv1.weight),
                    (f"enc.{i}.conv1.bias", blk.conv1.bias),
                    (f"enc.{i}.conv2.weight", blk.conv2.weight),
                    (f"enc.{i}.conv2.bias", blk.conv2.bias)]
        for i, a in enumerate(self.attn):
            out += [(f"attn.{i}.weight", a.weight), (f"attn.{i}.bias", a.bias)]
        for j, d in enumerate(self.dec):
            out += [(f"dec.{j}.weight", d.weight), (f"dec.{j}.bias", d.bias)]
        out += [("recon.weight", self.recon_head.weight),
                ("recon.bias", self.recon_head.bias),
                ("cls.weight", self.cls_weight), ("cls.bias", self.cls_bias)]
        return out

    def params(self) -> list[Tensor]:
        return [t for _, t in self.named_params()]

    def forward(self, x: Tensor) -> "ForwardTaps":
        return forward(self, x)

    def with_switches(self, switches: LossSwitches) -> "RfrlModel":
        """Same parameters, different loss heads enabled."""
        return replace(self, cfg=replace(self.cfg, switches=switches))


@dataclass
class ForwardTaps:
    enc_feats: list[Tensor]   # stage features, coarsening: full res .. deepest
    dec_feats: list[Tensor]   # decoder-side features, refining: deepest .. full res
    logits: Tensor            # (B, num_classes)
    probs: Tensor             # (B, num_classes)
    recon: Tensor             # (B, C, H, W) in [0, 1]


def _he_uniform(rng: PortableRng, shape: tuple[int, ...], fan_in: int,
                np_dtype) -> Tensor:
    bound = np.sqrt(6.0 / fan_in)
    vals = (rng.uniform(shape) * 2.0 - 1.0) * bound
    return Tensor(vals.astype(np_dtype), requires_grad=True)


def build_model(cfg: ModelConfig, seed: int, dtype="f32") -> RfrlModel:
    """Deterministically initialized model; same (cfg, seed) -> same bits."""
    cfg.validate()
    np_dtype = np.float32 if dtype in ("f32", np.float32) else np.float64
    rng = PortableRng(seed).child(0x6D6F64)  # model substream
    counter = [0]

    def conv(cin, cout, k, stride):
        w = _he_uniform(rng.child(counter[0]), (cout, cin, k, k),
                        cin * k * k, np_dtype)
        counter[0] += 1
        b = Tensor(np.zeros(cout, np_dtype), requires_grad=True)
        return Conv2dParams(weight=w, bias=b, stride=stride)

    def convt(cin, cout, k, stride):
        w = _he_uniform(rng.child(counter[0]), (cin, cout, k, k),
                        cin * k * k, np_dtype)
        counter[0] += 1
        b = Tensor(np.zeros(cout, np_dtype), requires_grad=True)
        return ConvT2dParams(weight=w, bias=b, stride=stride)

    cimg = cfg.input_shape[0]
    n = cfg.n_stages
    widths = cfg.widths()

    stem = conv(cimg, widths[0], 3, 1)
    enc_blocks = [EncBlock(conv1=conv(widths[i - 1], widths[i], 3, 1),
                           conv2=conv(widths[i], widths[i], 3, 2))
                  for i in range(1, n + 1)]
    # attn[j] projects the stage the decoder consumes at step j, so the
    # list runs deepest stage first; depth is preserved
    attn = [conv(widths[n - j], widths[n - j], 1, 1) for j in range(n + 1)]
    dec = [convt(widths[n - j], widths[n - 1 - j], 3, 2) for j in range(n)]
    recon_head = conv(widths[0], cimg, 1, 1)

    cls_w = _he_uniform(rng.child(counter[0]), (widths[n], cfg.num_classes),
                        widths[n], np_dtype)
    counter[0] += 1
    cls_b = Tensor(np.zeros(cfg.num_classes, np_dtype), requires_grad=True)

    return RfrlModel(cfg=cfg, stem=stem, enc_blocks=enc_blocks, attn=attn,
                     dec=dec, recon_head=recon_head, cls_weight=cls_w,
                     cls_bias=cls_b)


def forward(model: RfrlModel, x: Tensor) -> ForwardTaps:
    cfg = model.cfg
    if x.data.ndim != 4 or tuple(x.shape[1:]) != tuple(cfg.input_shape):
        raise ShapeError(
            f"input must be (B, {cfg.input_shape[0]}, {cfg.input_shape[1]}, "
            f"{cfg.input_shape[2]}), got {x.shape}")
    n = cfg.n_stages

    e = relu(conv2d(x, model.stem))
    enc_feats = [e]
    for blk in model.enc_blocks:
        e = relu(conv2d(e, blk.conv1))
        e = relu(conv2d(e, blk.conv2))
        enc_feats.append(e)

    s = conv2d(enc_feats[n], model.attn[0])
    dec_feats = [s]
    for j in range(n):
        u = conv2d_transpose(s, model.dec[j])
        dec_feats.append(u)
        skip = conv2d(enc_feats[n - 1 - j], model.attn[j + 1])
        try:
            s = ewise("add", skip, u)
        except ShapeError as exc:
            raise ShapeError(f"decoder stage {j} skip sum: {exc}") from None

    recon = sigmoid(conv2d(s, model.recon_head))
    pooled = global_avg_pool(enc_feats[n])
    logits = dense(pooled, model.cls_weight, model.cls_bias)
    probs = softmax(logits)
    return ForwardTaps(enc_feats=enc_feats, dec_feats=dec_feats,
                       logits=logits, probs=probs, recon=recon)


def param_count(tensors) -> int:
    return sum(int(t.size) for t in tensors)


def count_params(model: RfrlModel) -> int:
    return param_count(model.params())
