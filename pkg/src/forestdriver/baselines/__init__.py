"""Classical baselines: six model kinds, pixel or region rows, 3-fold CV tuning.

Rows always come with a ``groups`` array naming the event each row belongs
to. Region-mode rows are one per event; pixel-mode rows are one per pixel
inside the loss region, and an event's class is the mode of its pixel
predictions. Cross-validation folds are assigned per event.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .. import tensorio
from ..errors import FoldError, ValidationError
from ..features import FeatureTransform
from ..ingest import N_CLASSES, DriverClass
from ..metrics import macro_f1
from ..rng import make_rng
from .linear import LogisticRegression, RidgeClassifier, logistic_loss_grad
from .mlp import MLPClassifier
from .neighbors import KNearestNeighbors
from .trees import DecisionTree, RandomForest

KINDS = ("decision_tree", "random_forest", "logistic_regression", "ridge", "knn", "mlp")
MODES = ("pixel", "region")

GRID_KEYS = {
    "decision_tree": ("max_depth", "min_samples_leaf"),
    "random_forest": ("max_depth", "min_samples_leaf", "n_trees"),
    "logistic_regression": ("strength", "norm"),
    "ridge": ("strength", "norm"),
    "knn": ("k",),
    "mlp": ("n_hidden_layers", "neurons", "learning_rate"),
}
# inputs are z-scored inside the model for these kinds
STANDARDIZED = {"logistic_regression", "ridge", "knn", "mlp"}
MODEL_FORMAT = "forestdriver-baseline/1"


def _check_kind(kind, mode=None):
    if kind not in KINDS:
        raise ValidationError(f"unknown baseline kind {kind!r}; expected one of {KINDS}")
    if mode is not None and mode not in MODES:
        raise ValidationError(f"unknown baseline mode {mode!r}")


def build_estimator(kind, params, seed=0):
    p = dict(params)
    if kind == "decision_tree":
        return DecisionTree(p.get("max_depth"), p.get("min_samples_leaf", 1), seed=seed)
    if kind == "random_forest":
        return RandomForest(p.get("n_trees", 100), p.get("max_depth"),
                            p.get("min_samples_leaf", 1), p.get("max_features", "sqrt"),
                            p.get("bootstrap", True), seed=seed, n_jobs=p.get("n_jobs", 1))
    if kind == "logistic_regression":
        return LogisticRegression(p.get("strength", 1.0), p.get("norm", "l2"))
    if kind == "ridge":
        return RidgeClassifier(p.get("strength", 1.0), p.get("norm", "l2"))
    if kind == "knn":
        return KNearestNeighbors(p.get("k", 5))
    if kind == "mlp":
        return MLPClassifier(p.get("n_hidden_layers", 1), p.get("neurons", 32),
                             p.get("learning_rate", 1e-2), p.get("epochs", 200), seed=seed)
    raise ValidationError(f"unknown baseline kind {kind!r}")


def mode_vote(predictions) -> DriverClass:
    """Most frequent class; ties go to the earliest class in canonical order."""
    preds = np.asarray(predictions, dtype=np.int64)
    if preds.size == 0:
        raise ValidationError("cannot take the mode of zero predictions")
    return DriverClass(int(np.argmax(np.bincount(preds, minlength=N_CLASSES))))


@dataclass
class BaselineModel:
    kind: str
    mode: str
    params: dict
    estimator: object
    transform: FeatureTransform | None = None
    feature_names: tuple = ()
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def _prep(self, X):
        X = np.asarray(X, dtype=np.float64)
        if self.transform is not None:
            return self.transform.transform(X)
        return np.where(np.isfinite(X), X, 0.0)

    def predict(self, X):
        return np.asarray(self.estimator.predict(self._prep(X)), dtype=np.int64)

    def predict_region(self, rows) -> DriverClass:
        return predict_region(self, rows)


def fit(kind, mode, X, y, params, seed=0, feature_names=()) -> BaselineModel:
    """Fit one baseline on standardized-as-needed rows."""
    _check_kind(kind, mode)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray([int(v) for v in y], dtype=np.int64)
    if len(X) == 0:
        raise ValidationError("cannot fit a baseline on zero rows")
    if len(X) != len(y):
        raise ValidationError("rows and labels differ in length")
    transform = FeatureTransform.fit(X) if kind in STANDARDIZED and len(X) >= 2 else None
    Xp = transform.transform(X) if transform is not None else np.where(np.isfinite(X), X, 0.0)
    est = build_estimator(kind, params, seed).fit(Xp, y)
    return BaselineModel(kind, mode, dict(params), est, transform, tuple(feature_names), seed)


def predict_region(model: BaselineModel, rows) -> DriverClass:
    """Region class from one event's rows (mode over pixels, or the single row)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if len(rows) == 0:
        raise ValidationError("predict_region needs at least one row")
    preds = model.predict(rows)
    if model.mode == "region" and len(rows) == 1:
        return DriverClass(int(preds[0]))
    return mode_vote(preds)


def predict_events(model, X, groups):
    """Per-event predictions as ``{group: DriverClass}`` in first-seen order."""
    groups = np.asarray(groups)
    preds = model.predict(X)
    out = {}
    for g in dict.fromkeys(groups.tolist()):
        out[g] = mode_vote(preds[groups == g])
    return out


# --------------------------------------------------------------------------
# tuning


def grid_points(kind, grid):
    """Cartesian product of the kind's tunable keys, in key order."""
    _check_kind(kind)
    keys = GRID_KEYS[kind]
    values = []
    for k in keys:
        v = grid.get(k)
        if v is None:
            raise ValidationError(f"grid for {kind} is missing {k!r}")
        values.append(list(v))
    return [dict(zip(keys, combo)) for combo in itertools.product(*values)]


def event_folds(groups, labels, n_folds=3, seed=0):
    """Assign each event to a fold, stratified by class.

    Returns ``{group: fold}``. Events of each class are shuffled and dealt
    round-robin, continuing the deal across classes to balance fold sizes.
    """
    groups = np.asarray(groups)
    labels = np.asarray(labels)
    event_label = {}
    for g, lab in zip(groups.tolist(), labels.tolist()):
        if event_label.setdefault(g, lab) != lab:
            raise FoldError(f"event {g!r} has rows with different labels")
    if len(event_label) < n_folds:
        raise FoldError(f"need at least {n_folds} events for {n_folds}-fold CV, got {len(event_label)}")
    rng = make_rng(seed, "folds")
    assign = {}
    deal = 0
    for c in sorted(set(event_label.values())):
        evs = sorted((g for g, lab in event_label.items() if lab == c), key=str)
        for i in rng.permutation(len(evs)):
            assign[evs[i]] = deal % n_folds
            deal += 1
    return assign


def cv_score(kind, mode, X, y, groups, params, folds, n_folds=3, seed=0):
    """Per-fold region-level macro-F1 for one grid point."""
    groups = np.asarray(groups)
    fold_of_row = np.array([folds[g] for g in groups.tolist()])
    scores = []
    for f in range(n_folds):
        train = fold_of_row != f
        test = ~train
        if not test.any() or not train.any():
            raise FoldError(f"fold {f} is empty")
        if len(np.unique(y[train])) < 2:
            raise FoldError(f"training part of fold {f} has a single class")
        model = fit(kind, mode, X[train], y[train], params, seed)
        pred = predict_events(model, X[test], groups[test])
        truth = {g: int(v) for g, v in zip(groups[test].tolist(), y[test].tolist())}
        keys = list(pred)
        scores.append(macro_f1([truth[g] for g in keys], [int(pred[g]) for g in keys]))
    return scores


def tune_cv(kind, mode, X, y, groups, grid, seed=0, n_folds=3):
    """Grid point with the best mean fold macro-F1 (first wins ties).

    Returns ``(best_params, results)`` where ``results`` lists every grid
    point with its fold scores.
    """
    _check_kind(kind, mode)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray([int(v) for v in y], dtype=np.int64)
    points = grid_points(kind, grid)
    if not points:
        raise ValidationError("empty hyperparameter grid")
    folds = event_folds(groups, y, n_folds, seed)
    results = []
    best, best_score = None, -np.inf
    for params in points:
        scores = cv_score(kind, mode, X, y, groups, params, folds, n_folds, seed)
        mean = float(np.mean(scores))
        results.append({"params": params, "fold_scores": scores, "mean": mean})
        if mean > best_score:
            best, best_score = params, mean
    return best, results


# --------------------------------------------------------------------------
# persistence


def save_model(model: BaselineModel, path, meta=None):
    from ..features import ordering_hash

    arrays = dict(model.estimator.to_arrays())
    if model.transform is not None:
        arrays["transform.fill"] = model.transform.fill
        arrays["transform.mean"] = model.transform.mean
        arrays["transform.std"] = model.transform.std
    sidecar = {
        "format": MODEL_FORMAT,
        "kind": model.kind,
        "mode": model.mode,
        "hyperparams": model.params,
        "seed": model.seed,
        "feature_names": list(model.feature_names),
        "feature_ordering_hash": ordering_hash(model.feature_names),
        "standardized": model.transform is not None,
    }
    sidecar.update(meta or {})
    return tensorio.save(path, arrays, sidecar)


def load_model(path) -> BaselineModel:
    arrays, meta = tensorio.load(path)
    if meta.get("format") != MODEL_FORMAT:
        raise ValidationError(f"{path}: not a baseline model file")
    kind, params = meta["kind"], meta["hyperparams"]
    p = dict(params)
    if kind == "decision_tree":
        est = DecisionTree.from_arrays(arrays, max_depth=p.get("max_depth"),
                                       min_samples_leaf=p.get("min_samples_leaf", 1))
    elif kind == "random_forest":
        est = RandomForest.from_arrays(arrays, n_trees=p.get("n_trees", 100),
                                       max_depth=p.get("max_depth"),
                                       min_samples_leaf=p.get("min_samples_leaf", 1))
    elif kind == "logistic_regression":
        est = LogisticRegression.from_arrays(arrays, strength=p["strength"], norm=p["norm"])
    elif kind == "ridge":
        est = RidgeClassifier.from_arrays(arrays, strength=p["strength"], norm=p["norm"])
    elif kind == "knn":
        est = KNearestNeighbors.from_arrays(arrays, k=p["k"])
    else:
        est = MLPClassifier.from_arrays(arrays, n_hidden_layers=p["n_hidden_layers"],
                                        neurons=p["neurons"], learning_rate=p["learning_rate"])
    tf = None
    if meta.get("standardized"):
        tf = FeatureTransform(arrays["transform.fill"], arrays["transform.mean"],
                              arrays["transform.std"])
    return BaselineModel(kind, meta["mode"], params, est, tf, tuple(meta["feature_names"]),
                         meta.get("seed", 0))


__all__ = [
    "KINDS", "MODES", "GRID_KEYS", "BaselineModel", "fit", "predict_region", "predict_events",
    "tune_cv", "grid_points", "event_folds", "mode_vote", "save_model", "load_model",
    "DecisionTree", "RandomForest", "LogisticRegression", "RidgeClassifier",
    "KNearestNeighbors", "MLPClassifier", "logistic_loss_grad",
]
