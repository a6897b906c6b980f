"""Flat key-value run configuration.

Config files are plain text: one ``section.key = value`` pair per line,
``#`` comments. Every hyper-parameter of the recipe has a named key;
unknown keys are rejected. ``profiles/desk.cfg`` (the defaults baked in
here) trains in minutes; ``profiles/paper.cfg`` carries the full-scale
values.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .head import ModelDims
from .losses import RANKING_VARIANTS, LossConfig
from .synth import QUALITY_PRESETS, ProposalQualityConfig, SceneConfig


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    # data generation
    data_seed: int = 7
    data_train_samples: int = 2000
    data_val_samples: int = 250
    data_test_samples: int = 500
    data_image_w: int = 100
    data_image_h: int = 100
    data_min_objects: int = 2
    data_max_objects: int = 6
    data_num_shapes: int = 8
    data_num_colors: int = 6
    data_min_size: float = 18.0
    data_max_size: float = 42.0
    data_d_v: int = 32
    data_num_proposals: int = 8
    data_preset: str = "high"
    data_vocab_min_freq: int = 1
    # optional explicit quality knobs; negative sentinel = take from preset
    quality_miss_prob: float = -1.0
    quality_jitter: float = -1.0
    quality_distractor_frac: float = -1.0
    quality_feat_noise: float = -1.0
    quality_redundancy: int = -1
    quality_oversize: float = -1.0
    # model dims
    model_d_e: int = 32
    model_d_q: int = 64
    model_d_o: int = 64
    # optimization
    train_seed: int = 1
    train_iterations: int = 1000
    train_batch_size: int = 16
    train_base_lr: float = 0.003
    train_lr_decay_factor: float = 0.1
    train_lr_decay_at: float = 0.7
    train_beta1: float = 0.9
    train_beta2: float = 0.99
    train_epsilon: float = 1e-8
    train_eta: float = 0.5
    train_gamma: float = 1.0
    train_variant: str = "kld"
    train_regression: bool = True
    train_reg_mask_by_iou: bool = True
    train_grad_clip: float = 0.0
    train_weight_decay: float = 0.0
    train_val_every: int = 200
    train_log_every: int = 50
    # ablation
    ablate_seeds: int = 3

    def validate(self) -> None:
        positive = ("data_train_samples", "data_val_samples", "data_test_samples",
                    "data_image_w", "data_image_h", "data_d_v",
                    "data_num_proposals", "model_d_e", "model_d_q", "model_d_o",
                    "train_batch_size", "ablate_seeds")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{_dotted(name)} must be positive")
        if self.train_iterations < 0:
            raise ConfigError("train.iterations must be >= 0")
        if self.train_variant not in RANKING_VARIANTS:
            raise ConfigError(f"train.variant must be one of {RANKING_VARIANTS}")
        if not 0.0 < self.train_eta < 1.0:
            raise ConfigError("train.eta must lie in (0, 1)")
        if self.train_gamma < 0.0:
            raise ConfigError("train.gamma must be >= 0")
        if not 0.0 <= self.train_lr_decay_at <= 1.0:
            raise ConfigError("train.lr_decay_at must lie in [0, 1]")
        if self.data_preset not in QUALITY_PRESETS:
            raise ConfigError(f"data.preset must be one of {sorted(QUALITY_PRESETS)}")


def _dotted(attr: str) -> str:
    section, _, rest = attr.partition("_")
    return f"{section}.{rest}"


_FIELDS = {_dotted(f.name): (f.name, f.type) for f in fields(Config)}


def _parse_value(key: str, raw: str, typ: str):
    raw = raw.strip()
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return raw
    except ValueError as e:
        raise ConfigError(f"{key}: {e}") from e


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}: line {lineno}: expected key = value")
        key, value = (part.strip() for part in stripped.split("=", 1))
        pairs[key] = value
    return pairs


def load_config(path=None, overrides: dict[str, str] | None = None) -> Config:
    """Defaults, then the config file, then explicit overrides."""
    cfg = Config()
    pairs: dict[str, str] = {}
    if path is not None:
        pairs.update(parse_config_text(Path(path).read_text(encoding="utf-8"),
                                       source=str(path)))
    if overrides:
        pairs.update(overrides)
    for key, raw in pairs.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        attr, typ = _FIELDS[key]
        setattr(cfg, attr, _parse_value(key, raw, typ))
    cfg.validate()
    return cfg


def config_fingerprint(cfg: Config) -> dict:
    return {_dotted(f.name): getattr(cfg, f.name) for f in fields(Config)}


def scene_config(cfg: Config) -> SceneConfig:
    return SceneConfig(
        image_w=cfg.data_image_w, image_h=cfg.data_image_h,
        min_objects=cfg.data_min_objects, max_objects=cfg.data_max_objects,
        num_shapes=cfg.data_num_shapes, num_colors=cfg.data_num_colors,
        min_size=cfg.data_min_size, max_size=cfg.data_max_size,
    )


def quality_config(cfg: Config) -> ProposalQualityConfig:
    """Preset knobs, individually overridable via quality.* keys."""
    preset = QUALITY_PRESETS[cfg.data_preset]
    return ProposalQualityConfig(
        miss_prob=preset.miss_prob if cfg.quality_miss_prob < 0 else cfg.quality_miss_prob,
        jitter=preset.jitter if cfg.quality_jitter < 0 else cfg.quality_jitter,
        distractor_frac=(preset.distractor_frac if cfg.quality_distractor_frac < 0
                         else cfg.quality_distractor_frac),
        feat_noise=preset.feat_noise if cfg.quality_feat_noise < 0 else cfg.quality_feat_noise,
        redundancy=preset.redundancy if cfg.quality_redundancy < 0 else cfg.quality_redundancy,
        oversize=preset.oversize if cfg.quality_oversize < 0 else cfg.quality_oversize,
    )


def model_dims(cfg: Config) -> ModelDims:
    return ModelDims(d_v=cfg.data_d_v, d_e=cfg.model_d_e, d_q=cfg.model_d_q,
                     d_o=cfg.model_d_o)


def loss_config(cfg: Config) -> LossConfig:
    return LossConfig(eta=cfg.train_eta, gamma=cfg.train_gamma,
                      variant=cfg.train_variant,
                      regression=cfg.train_regression,
                      reg_mask_by_iou=cfg.train_reg_mask_by_iou)
