"""Training configuration and the line-based ``key = value`` config format.

The file format is UTF-8 text, one ``key = value`` per line, ``#`` starts
a comment. Unknown keys are a hard error. A snapshot written with
``save_config`` reproduces the run bit-for-bit together with the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

PARADIGMS = ("ts_same", "ts_split", "mutual_same", "mutual_split")
GRAD_PATHS = ("teacher_forward", "student_frozen")


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 60
    batch_size: int = 8          # half synthetic, half real
    crop: int = 64
    seed: int = 0

    width: int = 16
    groups: int = 4
    blocks_per_group: int = 1
    tnet_width: int = 8
    disc_width: int = 16

    base_lr: float = 1e-4
    max_lr: float = 1.5e-4
    lr_half_period: int = 100
    base_momentum: float = 0.8
    max_momentum: float = 0.9
    ema_decay: float = 0.999

    lambda_rc: float = 1.0
    lambda_adv: float = 0.2
    lambda_dc: float = 1e-2
    lambda_per: float = 0.2
    lambda_hda: float = 0.5
    dc_patch: int = 25
    charbonnier_eps: float = 1e-3
    feature_seed: int = 2023

    paradigm: str = "mutual_split"
    unsup_grad_path: str = "teacher_forward"

    hda_enabled: bool = True
    hda_start_epoch: int = 50
    hda_replace_prob: float = 0.5
    p_min: float = 0.5
    p_max: float = 1.4
    buffer_capacity: int = 512

    val_fraction: float = 0.25
    val_interval: int = 10       # epochs between validations

    def __post_init__(self):
        if self.paradigm not in PARADIGMS:
            raise ConfigError(f"paradigm must be one of {PARADIGMS}, got {self.paradigm!r}")
        if self.unsup_grad_path not in GRAD_PATHS:
            raise ConfigError(
                f"unsup_grad_path must be one of {GRAD_PATHS}, got {self.unsup_grad_path!r}"
            )
        if not 0.0 <= self.hda_replace_prob <= 1.0:
            raise ConfigError("hda_replace_prob must be a probability")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError("val_fraction must be in [0, 1)")
        if self.hda_start_epoch < 0:
            raise ConfigError("hda_start_epoch must be >= 0")
        if self.p_min <= 0 or self.p_max < self.p_min:
            raise ConfigError(f"invalid density range [{self.p_min}, {self.p_max}]")
        if self.batch_size < 2 or self.batch_size % 2:
            raise ConfigError("batch_size must be even and >= 2")

    @property
    def mutual(self) -> bool:
        return self.paradigm.startswith("mutual")

    @property
    def split_domain(self) -> bool:
        return self.paradigm.endswith("split")


def _parse_value(text: str, kind):
    if kind is bool:
        low = text.strip().lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"not a boolean: {text!r}")
    return kind(text.strip())


def parse_config(text: str, base: TrainConfig | None = None) -> TrainConfig:
    known = {f.name: f.type for f in fields(TrainConfig)}
    types = {f.name: type(getattr(TrainConfig(), f.name)) for f in fields(TrainConfig)}
    values = {}
    unknown = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in known:
            unknown.append(key)
            continue
        try:
            values[key] = _parse_value(val, types[key])
        except (ValueError, ConfigError) as e:
            raise ConfigError(f"line {lineno}: bad value for {key}: {e}") from e
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    merged = {}
    if base is not None:
        merged = {f.name: getattr(base, f.name) for f in fields(TrainConfig)}
    merged.update(values)
    return TrainConfig(**merged)


def load_config(path, base: TrainConfig | None = None) -> TrainConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read(), base)


def format_config(cfg: TrainConfig) -> str:
    lines = []
    for f in fields(TrainConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def save_config(cfg: TrainConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_config(cfg))
