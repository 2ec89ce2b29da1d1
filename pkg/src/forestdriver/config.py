"""Run configuration: one JSON document with a section per module."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError


@dataclass
class DataConfig:
    manifest: str = "manifest.jsonl"
    bands: list = field(default_factory=lambda: ["red", "green", "blue"])
    window_km: float = 4.98


@dataclass
class CompositeConfig:
    exclude_clouds: bool = True


@dataclass
class AugmentConfig:
    rotation_deg: float = 15.0
    translate_frac: float = 0.05
    scale_range: list = field(default_factory=lambda: [0.9, 1.1])
    flip_h_prob: float = 0.5
    flip_v_prob: float = 0.5
    affine_prob: float = 0.5
    salt_pepper_prob: float = 0.2
    salt_pepper_fraction: float = 0.01
    cloud_prob: float = 0.1
    haze_prob: float = 0.1
    fog_prob: float = 0.1
    cloud_alpha: list = field(default_factory=lambda: [0.3, 0.8])
    haze_alpha: list = field(default_factory=lambda: [0.05, 0.25])
    fog_alpha: list = field(default_factory=lambda: [0.1, 0.4])
    noise_octaves: int = 4
    white_level: float = 1.0
    sda_enabled: bool = True
    crop_size: int = 160
    max_crop_retries: int = 10

    def validate(self):
        probs = dict(flip_h_prob=self.flip_h_prob, flip_v_prob=self.flip_v_prob,
                     affine_prob=self.affine_prob, salt_pepper_prob=self.salt_pepper_prob,
                     salt_pepper_fraction=self.salt_pepper_fraction, cloud_prob=self.cloud_prob,
                     haze_prob=self.haze_prob, fog_prob=self.fog_prob)
        for name, p in probs.items():
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"augment.{name}={p} outside [0, 1]")
        for name in ("cloud_alpha", "haze_alpha", "fog_alpha"):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValidationError(f"augment.{name} must satisfy 0 <= lo <= hi <= 1")
        if self.crop_size <= 0 or self.max_crop_retries < 0:
            raise ValidationError("crop_size must be positive and max_crop_retries >= 0")
        return self


@dataclass
class FeatureConfig:
    groups: list = field(default_factory=lambda: [
        "topographic", "climatic", "soil", "accessibility", "proximity", "imaging"])
    visible_only: bool = False


@dataclass
class BaselineConfig:
    kind: str = "random_forest"
    mode: str = "region"
    predictors: str = "visible+aux"
    max_pixels_per_event: int = 200
    grid: dict = field(default_factory=lambda: {
        "max_depth": [4, 8, 16, None],
        "min_samples_leaf": [1, 5, 20],
        "n_trees": [100, 200],
        "strength": [0.01, 0.1, 1.0, 10.0],
        "norm": ["l1", "l2"],
        "k": [1, 5, 15, 51],
        "n_hidden_layers": [1, 2],
        "neurons": [32, 128],
        "learning_rate": [1e-2, 1e-3],
    })


@dataclass
class SegNetConfig:
    in_bands: int = 3
    widths: list = field(default_factory=lambda: [16, 32, 64, 128])
    decoder_width: int = 64
    n_classes: int = 4


@dataclass
class TrainConfig:
    gamma: float = 2.0
    lam: float = 0.5
    beta: float = 1.0
    eps: float = 1e-6
    learning_rate: float = 1e-3
    batch_size: int = 8
    epochs: int = 30
    dropout: float = 0.5
    weight_decay: float = 1e-4
    seed: int = 0
    fusion_enabled: bool = False
    fusion_hidden: list = field(default_factory=lambda: [128, 128])
    aggregate: str = "logits"
    pretrained_weights_path: str | None = None
    num_threads: int = 1

    def validate(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"train.lam={self.lam} outside [0, 1]")
        if self.gamma < 0 or self.beta < 0:
            raise ValidationError("train.gamma and train.beta must be >= 0")
        if not self.eps > 0:
            raise ValidationError("train.eps must be > 0")
        if self.aggregate not in ("logits", "probs"):
            raise ValidationError("train.aggregate must be 'logits' or 'probs'")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValidationError("train.batch_size and train.epochs must be >= 1")
        return self


@dataclass
class EvalConfig:
    splits: list = field(default_factory=lambda: ["val", "test"])
    crop_size: int = 160


@dataclass
class RunConfig:
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    composite: CompositeConfig = field(default_factory=CompositeConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    model: SegNetConfig = field(default_factory=SegNetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    base_dir: Path = field(default=Path("."), repr=False, compare=False)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        """Short hash embedded in every artifact to identify the run configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def resolve(self, path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    @classmethod
    def from_dict(cls, d, base_dir=Path(".")):
        kwargs = {}
        sections = {f.name: f for f in dataclasses.fields(cls)}
        for key, value in (d or {}).items():
            if key not in sections or key == "base_dir":
                raise ValidationError(f"unknown config section {key!r}")
            sub = _SECTION_TYPES.get(key)
            if sub is None:
                kwargs[key] = value
                continue
            known = {f.name for f in dataclasses.fields(sub)}
            unknown = set(value) - known
            if unknown:
                raise ValidationError(f"unknown keys in [{key}]: {sorted(unknown)}")
            kwargs[key] = sub(**value)
        cfg = cls(**kwargs, base_dir=Path(base_dir))
        cfg.augment.validate()
        cfg.train.validate()
        return cfg


_SECTION_TYPES = {
    "data": DataConfig,
    "composite": CompositeConfig,
    "augment": AugmentConfig,
    "features": FeatureConfig,
    "baseline": BaselineConfig,
    "model": SegNetConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
}


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from None
    return RunConfig.from_dict(raw, base_dir=path.parent)


def default_config() -> RunConfig:
    return RunConfig()
