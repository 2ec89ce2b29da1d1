"""Classification metrics over the four driver classes.

Zero-denominator convention: precision, recall and F1 are 0 whenever their
denominator is 0. Macro values are unweighted means over all four classes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EvalError
from .ingest import DRIVER_CLASSES, N_CLASSES, DriverClass


def confusion_matrix(true, pred, n_classes=N_CLASSES) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    true = np.asarray([int(t) for t in true], dtype=np.int64)
    pred = np.asarray([int(p) for p in pred], dtype=np.int64)
    if true.shape != pred.shape:
        raise EvalError("true and predicted label lists differ in length")
    if len(true) and (true.min() < 0 or pred.min() < 0
                      or true.max() >= n_classes or pred.max() >= n_classes):
        raise EvalError("labels outside the class range")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (true, pred), 1)
    return cm


def _safe_div(num, den):
    return num / den if den else 0.0


@dataclass
class MetricsReport:
    accuracy: float
    precision: list
    recall: list
    f1: list
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: list
    n_events: int
    excluded: list = field(default_factory=list)

    def to_dict(self):
        classes = [c.label for c in DRIVER_CLASSES[: len(self.f1)]]
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_class": {
                name: {"precision": p, "recall": r, "f1": f}
                for name, p, r, f in zip(classes, self.precision, self.recall, self.f1)
            },
            "classes": classes,
            "confusion": self.confusion,
            "n_events": self.n_events,
            "excluded": list(self.excluded),
            "zero_division": 0.0,
        }

    @classmethod
    def from_dict(cls, d):
        per = d["per_class"]
        classes = d["classes"]
        return cls(
            accuracy=d["accuracy"],
            precision=[per[c]["precision"] for c in classes],
            recall=[per[c]["recall"] for c in classes],
            f1=[per[c]["f1"] for c in classes],
            macro_precision=d["macro_precision"],
            macro_recall=d["macro_recall"],
            macro_f1=d["macro_f1"],
            confusion=d["confusion"],
            n_events=d["n_events"],
            excluded=list(d.get("excluded", [])),
        )


def metrics_from_confusion(cm, excluded=()) -> MetricsReport:
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total == 0:
        raise EvalError("no events to evaluate")
    prec, rec, f1 = [], [], []
    for c in range(cm.shape[0]):
        tp = int(cm[c, c])
        fp = int(cm[:, c].sum()) - tp
        fn = int(cm[c, :].sum()) - tp
        p = _safe_div(tp, tp + fp)
        r = _safe_div(tp, tp + fn)
        prec.append(p)
        rec.append(r)
        f1.append(_safe_div(2 * p * r, p + r))
    k = cm.shape[0]
    return MetricsReport(
        accuracy=int(np.trace(cm)) / total,
        precision=prec,
        recall=rec,
        f1=f1,
        macro_precision=sum(prec) / k,
        macro_recall=sum(rec) / k,
        macro_f1=sum(f1) / k,
        confusion=cm.tolist(),
        n_events=total,
        excluded=list(excluded),
    )


def compute_metrics(pairs, excluded=()) -> MetricsReport:
    """Metrics from an iterable of ``(true, predicted)`` class pairs."""
    pairs = list(pairs)
    if not pairs:
        raise EvalError("compute_metrics needs at least one (true, predicted) pair")
    true = [DriverClass.parse(t) for t, _ in pairs]
    pred = [DriverClass.parse(p) for _, p in pairs]
    return metrics_from_confusion(confusion_matrix(true, pred), excluded)


def macro_f1(true, pred, n_classes=N_CLASSES) -> float:
    """Macro-F1 for integer label arrays (used inside training loops)."""
    if len(true) == 0:
        raise EvalError("macro_f1 of an empty set")
    return metrics_from_confusion(confusion_matrix(true, pred, n_classes)).macro_f1
