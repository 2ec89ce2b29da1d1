"""Training loop with per-epoch validation and best macro-F1 checkpointing."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from ..augment import augment_example, sda_sample
from ..config import AugmentConfig, SegNetConfig, TrainConfig
from ..errors import NumericalError, TrainingError, TruncatedRegion
from ..features import FeatureTransform
from ..metrics import macro_f1
from ..rng import derive_seed, make_rng
from .checkpoint import Checkpoint, load_matching, state_arrays
from .inference import Predictor, event_mask, predict_region, prepare_input
from .losses import batch_loss
from .net import build_model

log = logging.getLogger(__name__)


@dataclass
class Example:
    """One event with its scenes, region mask and (raw) aux feature values."""

    event: object
    scene_set: object
    aux: np.ndarray | None = None


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list = field(default_factory=list)


def band_statistics(examples, bands):
    """Per-band mean and population std over valid composite pixels."""
    sums = np.zeros(len(bands))
    sq = np.zeros(len(bands))
    n = 0
    for ex in examples:
        comp = ex.scene_set.composite
        valid = ~comp.nodata_mask
        for i, b in enumerate(bands):
            v = comp.band(b)[valid].astype(np.float64)
            sums[i] += v.sum()
            sq[i] += (v * v).sum()
        n += int(valid.sum())
    if n == 0:
        raise TrainingError("training composites contain no valid pixels")
    mean = sums / n
    std = np.sqrt(np.maximum(sq / n - mean * mean, 0.0))
    return mean.tolist(), std.tolist()


def check_gradients(model):
    for name, p in model.named_parameters():
        if p.grad is not None and not torch.isfinite(p.grad).all():
            raise NumericalError(f"non-finite gradient in {name}", parameter=name)


def evaluate_events(predictor, examples, crop_size):
    """Region predictions for every example; truncated events are skipped."""
    preds, excluded = [], []
    for ex in examples:
        try:
            preds.append(predict_region(ex.event, ex.scene_set, predictor, ex.aux, crop_size))
        except TruncatedRegion:
            excluded.append(ex.event.event_id)
    return preds, excluded


def score(preds):
    if not preds:
        return float("nan")
    return macro_f1([int(p.true_class) for p in preds], [int(p.driver) for p in preds])


def _training_sample(ex, epoch, seed, bands, mean, std, aug: AugmentConfig):
    rng = make_rng(seed, ex.event.event_id, epoch)
    image = sda_sample(ex.scene_set, rng, aug.sda_enabled, ex.event.loss_year)
    mask = event_mask(ex.event, image)
    image, mask, usable = augment_example(image, mask, rng, aug)
    if not usable:
        return None
    x = prepare_input(image, bands, mean, std)
    return x, mask.inside


def train(train_examples, val_examples, seg_config: SegNetConfig, train_config: TrainConfig,
          augment_config: AugmentConfig, bands=("red", "green", "blue"), feature_names=(),
          eval_crop_size=None, log_path=None) -> TrainResult:
    """Fit the network; keep the epoch with the highest validation macro-F1.

    Each epoch draws, per training event, a scene (scene sampling), applies
    augmentation and a random crop, skips events whose region was cropped
    away, and takes Adam steps over mini-batches. Identical inputs and seed
    give identical checkpoints.
    """
    cfg = train_config.validate()
    aug = augment_config.validate()
    if not train_examples or not val_examples:
        raise TrainingError("training needs non-empty train and val splits")
    bands = tuple(bands)
    if seg_config.in_bands != len(bands):
        raise TrainingError(f"model expects {seg_config.in_bands} bands, got {bands}")
    eval_crop = eval_crop_size or aug.crop_size

    torch.manual_seed(derive_seed(cfg.seed, "torch") % (2 ** 63))
    torch.set_num_threads(max(1, cfg.num_threads))
    torch.use_deterministic_algorithms(True)

    mean, std = band_statistics(train_examples, bands)
    aux_tf = None
    if cfg.fusion_enabled:
        if not feature_names or any(ex.aux is None for ex in train_examples + val_examples):
            raise TrainingError("fusion needs aux features for every train/val event")
        aux_tf = FeatureTransform.fit(np.stack([ex.aux for ex in train_examples]))
    model = build_model(seg_config, cfg, n_aux=len(feature_names) if cfg.fusion_enabled else 0)
    if cfg.pretrained_weights_path:
        copied = load_matching(model, cfg.pretrained_weights_path)
        log.info("initialized %d tensors from %s", len(copied), cfg.pretrained_weights_path)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate,
                           weight_decay=cfg.weight_decay)
    predictor = Predictor(model, bands, mean, std, aux_tf, cfg.aggregate)

    history = []
    best_state, best_f1, best_epoch = None, -math.inf, -1
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(cfg.epochs):
            model.train()
            order = make_rng(cfg.seed, "order", epoch).permutation(len(train_examples))
            samples = []
            for i in order:
                ex = train_examples[int(i)]
                s = _training_sample(ex, epoch, cfg.seed, bands, mean, std, aug)
                if s is not None:
                    samples.append((s, ex))
            skipped = len(train_examples) - len(samples)
            if not samples:
                raise TrainingError(f"epoch {epoch}: no usable training example")
            losses = []
            for b in range(0, len(samples), cfg.batch_size):
                chunk = samples[b:b + cfg.batch_size]
                if len(chunk) == 1 and len(samples) > 1:
                    # batch norm needs more than one example
                    chunk = samples[b - 1:b + 1]
                x = torch.from_numpy(np.stack([s[0][0] for s in chunk]))
                m = torch.from_numpy(np.stack([s[0][1] for s in chunk]))
                labels = torch.tensor([int(s[1].event.driver) for s in chunk])
                t = labels[:, None, None].expand(m.shape).contiguous()
                aux = None
                if aux_tf is not None:
                    aux = torch.from_numpy(aux_tf.transform(np.stack([s[1].aux for s in chunk]))).float()
                res = batch_loss(model, x, t, m, cfg, aux=aux, labels=labels)
                if res.total is None:
                    continue
                opt.zero_grad()
                res.total.backward()
                check_gradients(model)
                opt.step()
                losses.append(float(res.total.detach()))
            preds, excluded = evaluate_events(predictor, val_examples, eval_crop)
            f1 = score(preds)
            acc = float(np.mean([p.driver == p.true_class for p in preds])) if preds else float("nan")
            rec = {"epoch": epoch, "train_loss": float(np.mean(losses)) if losses else None,
                   "val_macro_f1": f1, "val_accuracy": acc, "skipped": skipped,
                   "val_excluded": len(excluded)}
            history.append(rec)
            if log_fh:
                log_fh.write(json.dumps(rec, sort_keys=True) + "\n")
            log.info("epoch %d loss %.4f val macro-F1 %.4f", epoch, rec["train_loss"] or 0.0, f1)
            if f1 > best_f1:
                best_f1, best_epoch = f1, epoch
                best_state = state_arrays(model)
    finally:
        if log_fh:
            log_fh.close()
    if best_state is None:
        # every validation event was truncated; keep the final weights
        best_state, best_epoch = state_arrays(model), cfg.epochs - 1
    ckpt = Checkpoint(state=best_state, seg_config=seg_config, train_config=cfg, bands=bands,
                      band_mean=mean, band_std=std,
                      feature_names=tuple(feature_names) if cfg.fusion_enabled else (),
                      aux_transform=aux_tf, epoch=best_epoch, val_macro_f1=best_f1,
                      extra={"history": history})
    return TrainResult(ckpt, history)
