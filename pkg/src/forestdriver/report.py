"""Metrics JSON, confusion-matrix and class-map images.

Images are rendered with the Agg backend and written without timestamps, so
identical inputs produce identical bytes for a fixed matplotlib version.
"""
from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

from .ingest import DRIVER_CLASSES  # noqa: E402
from .metrics import MetricsReport  # noqa: E402

CLASS_COLORS = ("#1b7837", "#e08214", "#a6d96a", "#6a51a3")
OUTSIDE_COLOR = "#ffffff"
PNG_META = {"Software": None}


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(obj), encoding="utf-8")
    return path


def _savefig(fig, path):
    fig.savefig(path, format="png", dpi=100, metadata=PNG_META)
    plt.close(fig)


def render_confusion(confusion, path, title="Confusion matrix"):
    """Heatmap with count labels; returns the cell-label grid drawn."""
    cm = np.asarray(confusion, dtype=np.int64)
    labels = [c.label for c in DRIVER_CLASSES[: cm.shape[0]]]
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    ax.imshow(cm, cmap="Blues", vmin=0, vmax=max(int(cm.max()), 1))
    cells = [[str(int(v)) for v in row] for row in cm]
    thresh = cm.max() / 2 if cm.size else 0
    for i in range(cm.shape[0]):
        for j in range(cm.shape[1]):
            ax.text(j, i, cells[i][j], ha="center", va="center",
                    color="white" if cm[i, j] > thresh else "black")
    ax.set_xticks(range(len(labels)), labels, rotation=30, ha="right")
    ax.set_yticks(range(len(labels)), labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title)
    fig.tight_layout()
    _savefig(fig, path)
    return cells


def render_class_map(pixel_classes, path, mask=None, title=None):
    """Per-pixel class map; pixels outside ``mask`` are drawn white."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    grid = np.asarray(pixel_classes, dtype=np.int64)
    shown = np.where(mask, grid, len(CLASS_COLORS)) if mask is not None else grid
    cmap = ListedColormap(list(CLASS_COLORS) + [OUTSIDE_COLOR])
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(shown, cmap=cmap, vmin=-0.5, vmax=len(CLASS_COLORS) + 0.5, interpolation="nearest")
    ax.set_axis_off()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _savefig(fig, path)
    return Path(path)


def render_report(metrics: MetricsReport, out_dir, confusion=None, prefix="") -> dict:
    """Write ``metrics.json``, the confusion PNG and its JSON sidecar.

    The sidecar lists the class labels and the text drawn in every cell.
    Returns the written paths by role.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cm = metrics.confusion if confusion is None else np.asarray(confusion).tolist()
    paths = {"metrics": write_json(metrics.to_dict(), out / f"{prefix}metrics.json")}
    png = out / f"{prefix}confusion_matrix.png"
    cells = render_confusion(cm, png)
    paths["confusion_png"] = png
    paths["confusion_json"] = write_json(
        {"classes": [c.label for c in DRIVER_CLASSES[: len(cm)]], "rows": "true",
         "columns": "predicted", "counts": cm, "cell_labels": cells},
        out / f"{prefix}confusion_matrix.json")
    return paths
