"""Experiment configuration: flat key=value text, '#' comments, every
key optional with a documented default, unknown keys rejected.

The same text round-trips through checkpoints, so serialization is
canonical: every key emitted, schema order, one per line.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .data import AugmentConfig, SyntheticSpec
from .errors import ConfigError
from .model import LossSwitches, ModelConfig


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_ints(s: str) -> tuple[int, ...]:
    return tuple(int(p.strip()) for p in s.split(",") if p.strip())


def _emit_bool(v: bool) -> str:
    return "true" if v else "false"


def _emit_ints(v) -> str:
    return ",".join(str(int(x)) for x in v)


@dataclass
class ExperimentConfig:
    seed: int = 0
    out_dir: str = "runs/exp"
    # model
    in_channels: int = 1
    image_size: int = 32
    n_stages: int = 3
    stem_channels: int = 8
    stage_channels: tuple[int, ...] = (16, 32, 64)
    num_classes: int = 3
    # loss heads
    loss_supervised: bool = True
    loss_unsupervised: bool = True
    loss_frs: bool = True
    # feature-distance flavor used by training runs; the root mean
    # square variant measured best out-of-distribution in the ablation
    frs_kind: str = "l2"
    # optimizer
    lr: float = 1e-4
    batch: int = 4
    epochs: int = 50
    # data
    data_source: str = "synthetic"  # "synthetic" or "dir"
    data_path: str = ""
    train_per_class: int = 100
    val_per_class: int = 20
    test_per_class: int = 50
    ood_per_class: int = 50
    noise_sigma: float = 0.06
    thickness_lo: int = 3
    thickness_hi: int = 7
    # augmentation
    aug_enabled: bool = True
    aug_flip_p: float = 0.5
    aug_rotation_deg: float = 15.0
    aug_zoom_lo: float = 0.9
    aug_zoom_hi: float = 1.1
    aug_width_shift: float = 0.1
    aug_height_shift: float = 0.1

    def validate(self) -> None:
        if self.lr <= 0:
            raise ConfigError(f"optim.lr must be positive, got {self.lr}")
        if self.batch < 1:
            raise ConfigError(f"optim.batch must be >= 1, got {self.batch}")
        if self.epochs < 1:
            raise ConfigError(f"optim.epochs must be >= 1, got {self.epochs}")
        if self.frs_kind not in ("sq", "l1", "l2"):
            raise ConfigError(f"loss.frs_kind must be sq|l1|l2, got "
                              f"'{self.frs_kind}'")
        if self.data_source not in ("synthetic", "dir"):
            raise ConfigError(f"data.source must be synthetic|dir, got "
                              f"'{self.data_source}'")
        if self.data_source == "dir" and not self.data_path:
            raise ConfigError("data.path required when data.source = dir")
        for key in ("train_per_class", "val_per_class", "test_per_class",
                    "ood_per_class"):
            if getattr(self, key) < 1:
                raise ConfigError(f"data.{key} must be >= 1")
        self.model_config().validate()
        if self.aug_enabled:
            self.augment_config().validate()
        if self.data_source == "synthetic":
            self.synth_spec("none", self.train_per_class).validate()

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            input_shape=(self.in_channels, self.image_size, self.image_size),
            n_stages=self.n_stages,
            stem_channels=self.stem_channels,
            stage_channels=tuple(self.stage_channels),
            num_classes=self.num_classes,
            switches=self.switches())

    def switches(self) -> LossSwitches:
        return LossSwitches(supervised=self.loss_supervised,
                            unsupervised=self.loss_unsupervised,
                            frs=self.loss_frs)

    def with_switches(self, switches: LossSwitches) -> "ExperimentConfig":
        return replace(self, loss_supervised=switches.supervised,
                       loss_unsupervised=switches.unsupervised,
                       loss_frs=switches.frs)

    def synth_spec(self, shift: str, per_class: int) -> SyntheticSpec:
        return SyntheticSpec(classes=self.num_classes,
                             image_size=self.image_size,
                             per_class=per_class,
                             noise_sigma=self.noise_sigma,
                             thickness_lo=self.thickness_lo,
                             thickness_hi=self.thickness_hi,
                             shift=shift)

    def augment_config(self) -> AugmentConfig:
        return AugmentConfig(flip_p=self.aug_flip_p,
                             rotation_deg=self.aug_rotation_deg,
                             zoom_lo=self.aug_zoom_lo,
                             zoom_hi=self.aug_zoom_hi,
                             width_shift_frac=self.aug_width_shift,
                             height_shift_frac=self.aug_height_shift)


# key in the file -> (attribute, parse, emit)
SCHEMA: dict[str, tuple[str, object, object]] = {
    "seed": ("seed", int, str),
    "out_dir": ("out_dir", str, str),
    "model.in_channels": ("in_channels", int, str),
    "model.image_size": ("image_size", int, str),
    "model.n_stages": ("n_stages", int, str),
    "model.stem_channels": ("stem_channels", int, str),
    "model.stage_channels": ("stage_channels", _parse_ints, _emit_ints),
    "model.num_classes": ("num_classes", int, str),
    "loss.supervised": ("loss_supervised", _parse_bool, _emit_bool),
    "loss.unsupervised": ("loss_unsupervised", _parse_bool, _emit_bool),
    "loss.frs": ("loss_frs", _parse_bool, _emit_bool),
    "loss.frs_kind": ("frs_kind", str, str),
    "optim.lr": ("lr", float, repr),
    "optim.batch": ("batch", int, str),
    "optim.epochs": ("epochs", int, str),
    "data.source": ("data_source", str, str),
    "data.path": ("data_path", str, str),
    "data.train_per_class": ("train_per_class", int, str),
    "data.val_per_class": ("val_per_class", int, str),
    "data.test_per_class": ("test_per_class", int, str),
    "data.ood_per_class": ("ood_per_class", int, str),
    "data.noise_sigma": ("noise_sigma", float, repr),
    "data.thickness_lo": ("thickness_lo", int, str),
    "data.thickness_hi": ("thickness_hi", int, str),
    "aug.enabled": ("aug_enabled", _parse_bool, _emit_bool),
    "aug.flip_p": ("aug_flip_p", float, repr),
    "aug.rotation_deg": ("aug_rotation_deg", float, repr),
    "aug.zoom_lo": ("aug_zoom_lo", float, repr),
    "aug.zoom_hi": ("aug_zoom_hi", float, repr),
    "aug.width_shift": ("aug_width_shift", float, repr),
    "aug.height_shift": ("aug_height_shift", float, repr),
}


def parse_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        attr, parse, _ = SCHEMA[key]
        try:
            setattr(cfg, attr, parse(value))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for '{key}': "
                              f"{exc}") from None
    cfg.validate()
    return cfg


def config_to_text(cfg: ExperimentConfig) -> str:
    lines = []
    for key, (attr, _, emit) in SCHEMA.items():
        lines.append(f"{key} = {emit(getattr(cfg, attr))}")
    return "\n".join(lines) + "\n"


def read_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
