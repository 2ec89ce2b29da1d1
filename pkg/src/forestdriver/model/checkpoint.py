"""Checkpoints: named parameter tensors in a tensor file plus a JSON sidecar."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .. import tensorio
from ..config import SegNetConfig, TrainConfig
from ..errors import ValidationError
from ..features import FeatureTransform, ordering_hash
from .net import DriverNet, build_model

CHECKPOINT_FORMAT = "forestdriver-checkpoint/1"


@dataclass
class Checkpoint:
    state: dict  # name -> numpy array, in module order
    seg_config: SegNetConfig
    train_config: TrainConfig
    bands: tuple
    band_mean: list
    band_std: list
    feature_names: tuple = ()
    aux_transform: FeatureTransform | None = None
    epoch: int = -1
    val_macro_f1: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def n_aux(self):
        return len(self.feature_names)

    def build(self) -> DriverNet:
        """Fresh network with this checkpoint's weights, in eval mode."""
        model = build_model(self.seg_config, self.train_config, n_aux=self.n_aux)
        load_state(model, self.state)
        model.eval()
        return model

    def meta(self):
        return {
            "format": CHECKPOINT_FORMAT,
            "seg_config": dataclasses.asdict(self.seg_config),
            "train_config": dataclasses.asdict(self.train_config),
            "bands": list(self.bands),
            "band_mean": list(self.band_mean),
            "band_std": list(self.band_std),
            "feature_names": list(self.feature_names),
            "feature_ordering_hash": ordering_hash(self.feature_names),
            "aux_transform": None if self.aux_transform is None else self.aux_transform.to_dict(),
            "epoch": self.epoch,
            "val_macro_f1": self.val_macro_f1,
            **self.extra,
        }


def state_arrays(model) -> dict:
    """Parameters and buffers as numpy arrays, in ``state_dict`` order."""
    return {k: v.detach().cpu().numpy().copy() for k, v in model.state_dict().items()}


def load_state(model, state, strict=True):
    current = model.state_dict()
    tensors = {}
    for k, ref in current.items():
        if k not in state:
            if strict:
                raise ValidationError(f"checkpoint lacks tensor {k!r}")
            continue
        arr = np.asarray(state[k])
        if tuple(arr.shape) != tuple(ref.shape):
            raise ValidationError(f"tensor {k!r} has shape {arr.shape}, model wants {tuple(ref.shape)}")
        tensors[k] = torch.from_numpy(np.array(arr)).to(ref.dtype)
    model.load_state_dict(tensors, strict=strict)


def load_matching(model, path):
    """Copy every same-named, same-shaped tensor from a checkpoint file.

    Used to initialize from weights trained on another task; returns the
    names that were copied.
    """
    arrays, _ = tensorio.load(path)
    state = model.state_dict()
    copied = []
    for k, ref in state.items():
        if k in arrays and tuple(arrays[k].shape) == tuple(ref.shape):
            state[k] = torch.from_numpy(np.array(arrays[k])).to(ref.dtype)
            copied.append(k)
    model.load_state_dict(state)
    return copied


def save_checkpoint(ckpt: Checkpoint, path) -> Path:
    return tensorio.save(path, ckpt.state, ckpt.meta())


def load_checkpoint(path) -> Checkpoint:
    arrays, meta = tensorio.load(path)
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise ValidationError(f"{path}: not a model checkpoint")
    tf = meta.get("aux_transform")
    known = {"format", "seg_config", "train_config", "bands", "band_mean", "band_std",
             "feature_names", "feature_ordering_hash", "aux_transform", "epoch",
             "val_macro_f1", "format_version", "sha256"}
    return Checkpoint(
        state=arrays,
        seg_config=SegNetConfig(**meta["seg_config"]),
        train_config=TrainConfig(**meta["train_config"]),
        bands=tuple(meta["bands"]),
        band_mean=meta["band_mean"],
        band_std=meta["band_std"],
        feature_names=tuple(meta["feature_names"]),
        aux_transform=FeatureTransform.from_dict(tf) if tf else None,
        epoch=meta["epoch"],
        val_macro_f1=meta["val_macro_f1"],
        extra={k: v for k, v in meta.items() if k not in known},
    )
