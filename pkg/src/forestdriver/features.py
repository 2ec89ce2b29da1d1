"""Auxiliary predictor aggregation for the baselines and the fusion head.

A predictor table is one JSON file per event::

    {"width": 332, "height": 332,
     "grids": {"elevation": "elevation.f32", "slope": "slope.f32", "aspect": "aspect.f32"},
     "series": {"albedo": [["2010-01-01", 1234.0], ...], ...},
     "scalars": {"peat": true, "dist_road_km": 1.5, "dist_city_km": 22.0}}

Grid paths are relative to the JSON file and hold ``width*height``
little-endian float32 values aligned with the event image. Absent or null
entries are treated as missing.

Feature vector layout (fixed for every event)
---------------------------------------------
Groups in the order topographic, climatic, soil, accessibility, proximity,
imaging; predictors alphabetical within a group. Grid predictors contribute
``.mean .std .min .max`` over the loss region, climatic series contribute
``.mean .min .max`` over the five years before the event, scalars contribute
one value. Aspect is split into ``aspect_cos`` / ``aspect_sin`` grids. After
all values come one ``<predictor>.missing`` flag per predictor.
"""
from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyRegion, FeatureError, MissingPredictor, ShapeMismatch
from .raster import RasterImage, RegionMask, ndvi, zonal_stats

GRID_STATS = ("mean", "std", "min", "max")
SERIES_STATS = ("mean", "min", "max")

CLIMATIC = tuple(sorted((
    "albedo", "clear_sky_longwave_flux", "clear_sky_solar_flux", "soil_evaporation",
    "longwave_flux", "shortwave_flux", "ground_heat_flux", "latent_heat_flux",
    "specific_humidity", "potential_evaporation", "precipitation", "sensible_heat_flux",
    "soil_moisture", "air_pressure", "wind_speed", "water_runoff",
)))
VISIBLE = ("blue", "green", "red")
IMAGING = ("blue", "green", "ndvi", "nir", "red", "swir1", "swir2")

# group -> list of (predictor, kind, columns)
#   kind: "grid" (region stats), "series" (temporal stats), "scalar"
GROUPS = {
    "topographic": [("aspect", "grid", ("aspect_cos", "aspect_sin")),
                    ("elevation", "grid", ("elevation",)),
                    ("slope", "grid", ("slope",))],
    "climatic": [(name, "series", (name,)) for name in CLIMATIC],
    "soil": [("peat", "scalar", ("peat",))],
    "accessibility": [("dist_road_km", "scalar", ("dist_road_km",))],
    "proximity": [("dist_city_km", "scalar", ("dist_city_km",))],
    "imaging": [(name, "grid", (name,)) for name in IMAGING],
}
GROUP_ORDER = tuple(GROUPS)


def _predictors(groups, visible_only=False):
    out = []
    for g in GROUP_ORDER:
        if g not in groups:
            continue
        for name, kind, cols in GROUPS[g]:
            if visible_only and not (g == "imaging" and name in VISIBLE):
                continue
            out.append((name, kind, cols))
    return out


def feature_names(groups=GROUP_ORDER, visible_only=False):
    """Canonical column names for a feature configuration."""
    preds = _predictors(groups, visible_only)
    names = []
    for name, kind, cols in preds:
        stats = GRID_STATS if kind == "grid" else SERIES_STATS if kind == "series" else None
        for col in cols:
            if stats is None:
                names.append(col)
            else:
                names.extend(f"{col}.{s}" for s in stats)
    names.extend(f"{name}.missing" for name, _, _ in preds)
    return tuple(names)


def ordering_hash(names) -> str:
    import hashlib

    return hashlib.sha256("\n".join(names).encode()).hexdigest()[:16]


@dataclass
class PredictorTable:
    grids: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AuxFeatureVector:
    names: tuple
    values: np.ndarray  # NaN where missing

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))


def load_predictor_table(path) -> PredictorTable:
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    w, h = raw.get("width"), raw.get("height")
    grids = {}
    for name, rel in (raw.get("grids") or {}).items():
        if rel is None:
            grids[name] = None
            continue
        arr = np.fromfile(path.parent / rel, dtype="<f4")
        if w is None or h is None or arr.size != w * h:
            raise ShapeMismatch(f"{path}: grid {name!r} does not match width x height")
        grids[name] = arr.reshape(h, w).astype(np.float32)
    series = {}
    for name, rows in (raw.get("series") or {}).items():
        series[name] = None if rows is None else [(d, v) for d, v in rows]
    return PredictorTable(grids=grids, series=series, scalars=dict(raw.get("scalars") or {}))


def write_predictor_table(table: PredictorTable, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grids = {}
    shape = None
    for name, g in table.grids.items():
        if g is None:
            grids[name] = None
            continue
        g = np.asarray(g, dtype="<f4")
        shape = g.shape
        rel = f"{path.stem}.{name}.f32"
        g.tofile(path.parent / rel)
        grids[name] = rel
    raw = {
        "width": None if shape is None else shape[1],
        "height": None if shape is None else shape[0],
        "grids": grids,
        "series": {k: (None if v is None else [[str(d), float(x)] for d, x in v])
                   for k, v in table.series.items()},
        "scalars": table.scalars,
    }
    path.write_text(json.dumps(raw, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _as_date(d):
    return d if isinstance(d, dt.date) else dt.date.fromisoformat(str(d))


def aggregate_climatic(series, loss_year):
    """(mean, min, max) of daily values from Jan 1 of year-5 to Dec 31 of year-1."""
    start = dt.date(loss_year - 5, 1, 1)
    end = dt.date(loss_year - 1, 12, 31)
    vals = []
    for d, v in series or ():
        if v is None:
            continue
        v = float(v)
        if math.isnan(v):
            continue
        if start <= _as_date(d) <= end:
            vals.append(v)
    if not vals:
        raise MissingPredictor(f"no daily values between {start} and {end}")
    arr = np.asarray(vals, dtype=np.float64)
    return float(arr.sum() / arr.size), float(arr.min()), float(arr.max())


def _grid_block(grid, mask, nodata):
    s = zonal_stats(grid, mask, nodata)
    return [s[k] for k in GRID_STATS]


def _imaging_grid(name, image: RasterImage):
    if image is None:
        return None, None
    if name == "ndvi":
        if "nir" not in image.bands or "red" not in image.bands:
            return None, None
        grid, nd = ndvi(image.bands["nir"], image.bands["red"])
        return grid, nd | image.nodata_mask
    if name not in image.bands:
        return None, None
    return image.bands[name], image.nodata_mask


def build_feature_vector(event, table: PredictorTable, mask: RegionMask,
                         image: RasterImage | None = None,
                         groups=GROUP_ORDER, visible_only=False) -> AuxFeatureVector:
    """Aggregate every configured predictor over the event's loss region.

    Imaging predictors come from ``image`` (normally the composite); the rest
    from ``table``. Missing predictors yield NaN values and a missing flag of
    1; imputation happens in :class:`FeatureTransform`.
    """
    if mask.pixel_count == 0:
        raise EmptyRegion(f"event {getattr(event, 'event_id', '?')}: empty region mask")
    preds = _predictors(groups, visible_only)
    values, flags = [], []
    for name, kind, cols in preds:
        width = len(cols) * (4 if kind == "grid" else 3 if kind == "series" else 1)
        block = None
        try:
            if kind == "grid":
                if name in IMAGING:
                    grid, nd = _imaging_grid(name, image)
                else:
                    grid, nd = table.grids.get(name), None
                if grid is not None:
                    if name == "aspect":
                        rad = np.radians(np.asarray(grid, dtype=np.float64) * 0.01)
                        block = _grid_block(np.cos(rad), mask, nd) + _grid_block(np.sin(rad), mask, nd)
                    else:
                        block = _grid_block(grid, mask, nd)
            elif kind == "series":
                series = table.series.get(name)
                if series is not None:
                    block = list(aggregate_climatic(series, event.loss_year))
            else:
                v = table.scalars.get(name)
                if v is not None:
                    block = [float(v)]
        except (EmptyRegion, MissingPredictor):
            block = None
        if block is None or not all(math.isfinite(x) for x in block):
            values.extend([math.nan] * width)
            flags.append(1.0)
        else:
            values.extend(block)
            flags.append(0.0)
    if flags and all(flags):
        raise FeatureError(f"event {getattr(event, 'event_id', '?')}: every predictor is missing")
    names = feature_names(groups, visible_only)
    return AuxFeatureVector(names=names, values=np.asarray(values + flags, dtype=np.float64))


class FeatureTransform:
    """Training-split imputation and z-scoring.

    Missing values are replaced with the training mean of the column; columns
    with zero training variance map to 0.
    """

    def __init__(self, fill, mean, std):
        self.fill = np.asarray(fill, dtype=np.float64)
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 2:
            raise FeatureError("standardization needs at least two training vectors")
        finite = np.isfinite(X)
        counts = finite.sum(axis=0)
        sums = np.where(finite, X, 0.0).sum(axis=0)
        fill = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        Xf = np.where(finite, X, fill)
        mean = Xf.mean(axis=0)
        std = np.sqrt(((Xf - mean) ** 2).mean(axis=0))
        return cls(fill, mean, std)

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != len(self.mean):
            raise ShapeMismatch(f"expected {len(self.mean)} features, got {X.shape[1]}")
        Xf = np.where(np.isfinite(X), X, self.fill)
        safe = np.where(self.std > 0, self.std, 1.0)
        Z = np.where(self.std > 0, (Xf - self.mean) / safe, 0.0)
        return Z[0] if single else Z

    def to_dict(self):
        return {"fill": self.fill.tolist(), "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["fill"], d["mean"], d["std"])


def standardize(train_vectors, other=()):
    """Fit on training vectors; return the transform and all transformed sets."""
    tf = FeatureTransform.fit(train_vectors)
    return tf, tf.transform(train_vectors), [tf.transform(o) for o in other]


def write_feature_csv(path, rows, names):
    """``rows`` is a list of (event_id, split, driver_label, values)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["event_id", "split", "driver", *names])
        for event_id, split, driver, values in rows:
            w.writerow([event_id, split, driver, *(repr(float(v)) for v in values)])
    return path


def read_feature_csv(path):
    """Return ``(names, rows)`` in the layout written by :func:`write_feature_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        names = tuple(header[3:])
        rows = [(row[0], row[1], row[2], np.array([float(v) for v in row[3:]])) for row in r]
    return names, rows
