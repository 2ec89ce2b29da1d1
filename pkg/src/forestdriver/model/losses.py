"""Region-masked segmentation and classification losses.

All losses are computed per example over the pixels inside that example's
loss-region mask and averaged over the examples whose mask is non-empty.
Examples with an empty mask are dropped before the forward pass by
:func:`batch_loss`, so they contribute nothing, not even batch statistics.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
from torch.nn import functional as F

from .net import region_mean


def focal_loss(logits, targets, mask, gamma):
    """Per-example mean over masked pixels of ``-(1 - p_y)^gamma * log p_y``.

    ``logits`` (B, C, H, W), ``targets`` (B, H, W) long, ``mask`` (B, H, W)
    bool. ``gamma = 0`` is masked cross-entropy. Empty masks give 0.
    """
    logp = F.log_softmax(logits, dim=1)
    logp_y = logp.gather(1, targets.unsqueeze(1)).squeeze(1)
    term = -((1.0 - logp_y.exp()).clamp_min(0.0) ** gamma) * logp_y
    m = mask.to(logits.dtype)
    return (term * m).sum(dim=(1, 2)) / m.sum(dim=(1, 2)).clamp_min(1.0)


def masked_cross_entropy(logits, targets, mask):
    logp = F.log_softmax(logits, dim=1)
    logp_y = logp.gather(1, targets.unsqueeze(1)).squeeze(1)
    m = mask.to(logits.dtype)
    return -(logp_y * m).sum(dim=(1, 2)) / m.sum(dim=(1, 2)).clamp_min(1.0)


def gdice_loss(probs, targets, mask, eps):
    """Per-example generalized dice loss over masked pixels.

    ``1 - 2 sum_c w_c sum_i p_ci g_ci / sum_c w_c sum_i (p_ci + g_ci)`` with
    ``w_c = 1 / (sum_i g_ci + eps)^2`` for classes present in the masked
    targets and ``w_c = 0`` for absent ones. Values lie in [0, 1]; empty masks
    give 0.
    """
    n_classes = probs.shape[1]
    g = F.one_hot(targets, n_classes).permute(0, 3, 1, 2).to(probs.dtype)
    m = mask.to(probs.dtype).unsqueeze(1)
    g = g * m
    p = probs * m
    g_sum = g.sum(dim=(2, 3))
    w = torch.where(g_sum > 0, 1.0 / (g_sum + eps) ** 2, torch.zeros_like(g_sum))
    inter = (p * g).sum(dim=(2, 3))
    union = (p + g).sum(dim=(2, 3))
    num = (w * inter).sum(dim=1)
    den = (w * union).sum(dim=1)
    has = den > 0
    return torch.where(has, 1.0 - 2.0 * num / torch.where(has, den, torch.ones_like(den)),
                       torch.zeros_like(den))


def region_labels(targets, mask, n_classes):
    """Most frequent target class inside each mask (ties -> lowest class)."""
    onehot = F.one_hot(targets, n_classes) * mask.unsqueeze(-1).long()
    return onehot.sum(dim=(1, 2)).argmax(dim=1)


@dataclass
class LossResult:
    total: torch.Tensor | None
    focal: torch.Tensor | None = None
    gdice: torch.Tensor | None = None
    classification: torch.Tensor | None = None
    class_scores: torch.Tensor | None = None
    n_usable: int = 0


def loss_total(model, logits, targets, mask, config, aux=None, labels=None) -> LossResult:
    """``lam * focal + (1 - lam) * gdice + beta * CE(class scores, label)``.

    Class scores are the mean masked logits, or the fusion head output when
    the model has one. ``labels`` default to the majority target in each mask.
    Every term is averaged over examples; returns ``total=None`` when no
    example has a non-empty mask.
    """
    usable = mask.flatten(1).any(dim=1)
    if not bool(usable.any()):
        return LossResult(total=None)
    if not bool(usable.all()):
        logits, targets, mask = logits[usable], targets[usable], mask[usable]
        aux = aux[usable] if aux is not None else None
        labels = labels[usable] if labels is not None else None
    n_classes = logits.shape[1]
    if labels is None:
        labels = region_labels(targets, mask, n_classes)
    focal = focal_loss(logits, targets, mask, config.gamma).mean()
    gd = gdice_loss(torch.softmax(logits, dim=1), targets, mask, config.eps).mean()
    scores = model.class_scores(logits, mask, aux) if model is not None else region_mean(logits, mask)
    ce = F.cross_entropy(scores, labels)
    total = config.lam * focal + (1.0 - config.lam) * gd + config.beta * ce
    return LossResult(total, focal, gd, ce, scores, int(usable.sum()))


def batch_loss(model, images, targets, mask, config, aux=None, labels=None) -> LossResult:
    """Forward the examples with non-empty masks and return their loss."""
    usable = mask.flatten(1).any(dim=1)
    if not bool(usable.any()):
        return LossResult(total=None)
    if not bool(usable.all()):
        images, targets, mask = images[usable], targets[usable], mask[usable]
        aux = aux[usable] if aux is not None else None
        labels = labels[usable] if labels is not None else None
    logits = model(images)
    return loss_total(model, logits, targets, mask, config, aux=aux, labels=labels)
