"""Encoder / pyramid-decoder segmentation network and the fusion head."""
from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from ..config import SegNetConfig
from ..errors import ShapeError


class ConvBlock(nn.Sequential):
    def __init__(self, cin, cout):
        super().__init__(
            nn.Conv2d(cin, cout, 3, padding=1, bias=False),
            nn.BatchNorm2d(cout),
            nn.ReLU(inplace=False),
            nn.Conv2d(cout, cout, 3, padding=1, bias=False),
            nn.BatchNorm2d(cout),
            nn.ReLU(inplace=False),
        )


class SegNet(nn.Module):
    """Compact encoder with a feature-pyramid decoder.

    Encoder stage ``i`` runs at 1/2**i of the input resolution. The decoder
    merges stages top-down through 1x1 lateral convolutions, smooths each
    pyramid level, upsamples every level to full resolution and sums them
    before the 1x1 classifier. Output logits have the input's spatial size.
    """

    def __init__(self, config: SegNetConfig):
        super().__init__()
        self.config = config
        widths = list(config.widths)
        d = config.decoder_width
        self.stages = nn.ModuleList()
        cin = config.in_bands
        for w in widths:
            self.stages.append(ConvBlock(cin, w))
            cin = w
        self.laterals = nn.ModuleList(nn.Conv2d(w, d, 1) for w in widths)
        self.smooth = nn.ModuleList(
            nn.Sequential(nn.Conv2d(d, d, 3, padding=1, bias=False), nn.BatchNorm2d(d),
                          nn.ReLU(inplace=False))
            for _ in widths
        )
        self.head = nn.Conv2d(d, config.n_classes, 1)

    @property
    def depth(self) -> int:
        """Number of 2x downsamplings in the encoder."""
        return len(self.stages) - 1

    def check_input(self, x):
        if x.dim() != 4 or x.shape[1] != self.config.in_bands:
            raise ShapeError(f"expected (B, {self.config.in_bands}, H, W), got {tuple(x.shape)}")
        div = 2 ** self.depth
        if x.shape[2] % div or x.shape[3] % div:
            raise ShapeError(f"crop {tuple(x.shape[2:])} not divisible by {div}")

    def forward(self, x):
        self.check_input(x)
        feats = []
        h = x
        for i, stage in enumerate(self.stages):
            if i > 0:
                h = F.max_pool2d(h, 2)
            h = stage(h)
            feats.append(h)
        top = None
        levels = []
        for i in range(len(feats) - 1, -1, -1):
            lat = self.laterals[i](feats[i])
            top = lat if top is None else lat + F.interpolate(top, scale_factor=2, mode="nearest")
            levels.append((i, self.smooth[i](top)))
        out = None
        for i, p in levels:
            if i > 0:
                p = F.interpolate(p, scale_factor=2 ** i, mode="nearest")
            out = p if out is None else out + p
        return self.head(out)


class FusionHead(nn.Module):
    """Region logits concatenated with auxiliary features, then three FC layers.

    ReLU and dropout follow the first and second layers.
    """

    def __init__(self, n_aux, hidden=(128, 128), dropout=0.5, n_classes=4):
        super().__init__()
        self.n_aux = n_aux
        h1, h2 = hidden
        self.net = nn.Sequential(
            nn.Linear(n_classes + n_aux, h1), nn.ReLU(), nn.Dropout(dropout),
            nn.Linear(h1, h2), nn.ReLU(), nn.Dropout(dropout),
            nn.Linear(h2, n_classes),
        )

    def forward(self, region_logits, aux):
        if aux.dim() != 2 or aux.shape[1] != self.n_aux:
            raise ShapeError(f"fusion head expects {self.n_aux} aux features, got {tuple(aux.shape)}")
        return self.net(torch.cat([region_logits, aux.to(region_logits.dtype)], dim=1))


def region_mean(values, mask):
    """Mean of per-pixel vectors over each example's mask: (B, C, H, W) -> (B, C)."""
    m = mask.to(values.dtype).unsqueeze(1)
    count = m.sum(dim=(2, 3)).clamp_min(1.0)
    return (values * m).sum(dim=(2, 3)) / count


class DriverNet(nn.Module):
    """Segmentation network plus the optional fusion head."""

    def __init__(self, seg_config: SegNetConfig, n_aux=0, fusion=False,
                 fusion_hidden=(128, 128), dropout=0.5):
        super().__init__()
        self.seg = SegNet(seg_config)
        self.fusion = FusionHead(n_aux, tuple(fusion_hidden), dropout,
                                 seg_config.n_classes) if fusion else None

    def forward(self, x):
        return self.seg(x)

    def class_scores(self, logits, mask, aux=None, aggregate="logits"):
        """Region-level class scores from pixel logits.

        Without fusion: mean of masked logits (``aggregate="logits"``) or of
        masked softmax probabilities (``"probs"``). With fusion: the head's
        output on the mean masked logits and ``aux``.
        """
        pooled = region_mean(logits, mask)
        if self.fusion is not None:
            if aux is None:
                raise ShapeError("fusion model needs auxiliary features")
            return self.fusion(pooled, aux)
        if aggregate == "probs":
            return region_mean(torch.softmax(logits, dim=1), mask)
        return pooled


def build_model(seg_config: SegNetConfig, train_config, n_aux=0) -> DriverNet:
    return DriverNet(seg_config, n_aux=n_aux, fusion=train_config.fusion_enabled,
                     fusion_hidden=train_config.fusion_hidden, dropout=train_config.dropout)
