"""Central finite-difference check of autograd gradients in float64."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..config import SegNetConfig, TrainConfig
from .losses import loss_total
from .net import build_model


@dataclass
class GradCheckResult:
    max_rel_error: float
    worst_parameter: str
    n_parameters: int
    per_parameter: dict


def relative_error(analytic, numeric, floor=1e-6):
    """``|a - n| / max(|a|, |n|, floor)``, elementwise."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def tiny_setup(seed=0, size=8, batch=2, n_aux=3, fusion=True):
    """A small fusion network in float64 plus a fixed random batch."""
    torch.manual_seed(seed)
    seg = SegNetConfig(in_bands=3, widths=[4, 8], decoder_width=8)
    cfg = TrainConfig(fusion_enabled=fusion, fusion_hidden=[8, 8], dropout=0.0)
    model = build_model(seg, cfg, n_aux=n_aux if fusion else 0).double()
    g = torch.Generator().manual_seed(seed + 1)
    x = torch.randn(batch, 3, size, size, generator=g, dtype=torch.float64)
    t = torch.randint(0, 4, (batch, size, size), generator=g)
    m = torch.rand(batch, size, size, generator=g) < 0.6
    aux = torch.randn(batch, n_aux, generator=g, dtype=torch.float64) if fusion else None
    labels = torch.arange(batch) % 4
    return model, cfg, (x, t, m, aux, labels)


def check_gradients(model, cfg, batch, step=1e-5, floor=1e-6) -> GradCheckResult:
    """Compare backprop gradients with central differences for every parameter."""
    x, t, m, aux, labels = batch
    model.train()

    def loss():
        return loss_total(model, model(x), t, m, cfg, aux=aux, labels=labels).total

    model.zero_grad()
    loss().backward()
    worst, worst_name, per = 0.0, "", {}
    n = 0
    with torch.no_grad():
        for name, p in model.named_parameters():
            analytic = p.grad.detach().clone().reshape(-1)
            flat = p.data.view(-1)
            numeric = torch.empty_like(analytic)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + step
                up = loss().item()
                flat[i] = orig - step
                down = loss().item()
                flat[i] = orig
                numeric[i] = (up - down) / (2 * step)
            err = float(relative_error(analytic.numpy(), numeric.numpy(), floor).max())
            per[name] = err
            n += flat.numel()
            if err > worst:
                worst, worst_name = err, name
    return GradCheckResult(worst, worst_name, n, per)
