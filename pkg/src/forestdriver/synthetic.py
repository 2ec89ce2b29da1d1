"""Synthetic fixtures: a textured image dataset, a separable feature set and
count-matched manifests.

Everything here is generated from a seed so tests and the CLI can rebuild
identical data on demand.
"""
from __future__ import annotations

import datetime as dt
import json
from pathlib import Path

import numpy as np

from .composite import compute_time_window
from .features import CLIMATIC, PredictorTable, write_predictor_table
from .ingest import CATEGORY_TABLE, REFERENCE_COUNTS, SPLITS, TEMPORAL_CUTOFF, DriverClass
from .raster import RasterImage, write_raster
from .rng import make_rng

# one representative original category per class
CLASS_CATEGORY = {
    DriverClass.PLANTATION: "Oil palm plantation",
    DriverClass.SMALLHOLDER_AGRICULTURE: "Small-scale agriculture",
    DriverClass.GRASSLAND_SHRUBLAND: "Grassland/shrubland",
    DriverClass.OTHER: "Mining",
}
DROPPABLE = tuple(c for c, (_, drop) in CATEGORY_TABLE.items() if drop)

FOREST_RGB = (0.05, 0.12, 0.04)


def _texture(cls, size, rng):
    """(3, size, size) class texture in reflectance units."""
    rows, cols = np.mgrid[0:size, 0:size]
    out = np.empty((3, size, size))
    if cls == DriverClass.PLANTATION:
        # planted rows
        on = (rows // 2) % 2 == 0
        out[0] = np.where(on, 0.07, 0.16)
        out[1] = np.where(on, 0.24, 0.12)
        out[2] = np.where(on, 0.05, 0.10)
    elif cls == DriverClass.SMALLHOLDER_AGRICULTURE:
        # patchwork of small fields
        on = ((rows // 5) + (cols // 5)) % 2 == 0
        out[0] = np.where(on, 0.26, 0.10)
        out[1] = np.where(on, 0.18, 0.20)
        out[2] = np.where(on, 0.12, 0.08)
    elif cls == DriverClass.GRASSLAND_SHRUBLAND:
        out[0], out[1], out[2] = 0.15, 0.30, 0.10
    else:
        out[0], out[1], out[2] = 0.36, 0.31, 0.29
        out += rng.normal(0.0, 0.04, (1, size, size))
    return out


def _polygon(size, rng):
    """A convex quadrilateral near the image center."""
    cx, cy = size / 2 + rng.uniform(-5, 5, 2)
    angles = np.array([0.25, 0.75, 1.25, 1.75]) * np.pi + rng.uniform(-0.2, 0.2, 4)
    radius = rng.uniform(size * 0.15, size * 0.24, 4)
    ring = [(round(float(cx + r * np.cos(a)), 3), round(float(cy + r * np.sin(a)), 3))
            for a, r in zip(angles, radius)]
    return [ring]


def _event_image(cls, polygon, size, rng):
    from .raster import rasterize_polygon

    inside = rasterize_polygon(polygon, size, size).inside
    base = np.empty((3, size, size))
    for i, v in enumerate(FOREST_RGB):
        base[i] = v
    base += rng.normal(0.0, 0.01, base.shape)
    tex = _texture(cls, size, rng)
    base[:, inside] = tex[:, inside]
    return base


def _scene(base, date, scene_id, rng, cloudy=False, origin=(0.0, 0.0)):
    size = base.shape[1]
    img = base * rng.uniform(0.92, 1.08) + rng.normal(0.0, 0.008, base.shape)
    cloud = np.zeros((size, size), dtype=np.float32)
    if cloudy:
        rows, cols = np.mgrid[0:size, 0:size]
        cy, cx = rng.uniform(0, size, 2)
        r = rng.uniform(size * 0.15, size * 0.3)
        cloud[(rows - cy) ** 2 + (cols - cx) ** 2 < r * r] = 1.0
        img[:, cloud > 0] = 0.9
    bands = {"red": img[0], "green": img[1], "blue": img[2],
             "qa_cloud": cloud, "qa_cirrus": np.zeros_like(cloud)}
    return RasterImage(bands=bands, pixel_size=15.0, origin=origin, acquisition_date=date,
                       scene_id=scene_id)


def _predictor_table(cls, loss_year, size, rng):
    rows, cols = np.mgrid[0:size, 0:size]
    elev = 50.0 + 40.0 * int(cls) + rng.normal(0, 5.0) + 0.2 * rows
    grids = {
        "elevation": elev.astype(np.float32),
        "slope": (2.0 + rng.uniform(0, 3) + 0.0 * rows).astype(np.float32),
        "aspect": rng.uniform(0, 36000, (size, size)).astype(np.float32),
    }
    series = {}
    for k, name in enumerate(CLIMATIC):
        vals = []
        for year in range(loss_year - 5, loss_year):
            for month in (1, 4, 7, 10):
                vals.append((dt.date(year, month, 15).isoformat(),
                             float(round(10.0 * k + int(cls) + rng.normal(0, 1.0), 4))))
        series[name] = vals
    scalars = {"peat": float(cls == DriverClass.PLANTATION),
               "dist_road_km": round(float(rng.uniform(0.5, 3.0) * (1 + int(cls))), 4),
               "dist_city_km": round(float(rng.uniform(5, 50)), 4)}
    return PredictorTable(grids=grids, series=series, scalars=scalars)


def make_textured_dataset(root, n_train=32, n_val=8, n_test=8, size=72, n_scenes=3,
                          seed=0) -> Path:
    """Write a small event set with class-specific textures.

    Each event has ``n_scenes`` dated scenes (one partly clouded, flagged in
    its QA band), a predictor table and a convex region polygon near the
    center. Classes are balanced within each split. Returns the manifest path.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    records = []
    counts = {"train": n_train, "val": n_val, "test": n_test}
    idx = 0
    for s_i, split in enumerate(SPLITS):
        for j in range(counts[split]):
            cls = DriverClass(j % 4)
            rng = make_rng(seed, "event", split, j)
            event_id = f"syn-{split}-{j:03d}"
            loss_year = int(rng.integers(TEMPORAL_CUTOFF, 2017))
            lat = round(-2.0 + 0.1 * (idx % 20), 4)
            lon = round(110.0 + 0.1 * (idx // 20) + 1.0 * s_i, 4)
            idx += 1
            polygon = _polygon(size, rng)
            base = _event_image(cls, polygon, size, rng)
            image_dir = root / "events" / event_id
            y0, y1 = compute_time_window(loss_year)
            cloudy = int(rng.integers(0, n_scenes))
            for k in range(n_scenes):
                year = int(rng.integers(y0, y1 + 1))
                date = dt.date(year, int(rng.integers(1, 13)), int(rng.integers(1, 29)))
                sid = f"scene_{k:02d}_{date.isoformat()}"
                write_raster(_scene(base, date, sid, rng, cloudy=(k == cloudy), origin=(lon, lat)),
                             image_dir / sid)
            write_predictor_table(_predictor_table(cls, loss_year, size, rng),
                                  image_dir / "aux.json")
            records.append({
                "event_id": event_id, "lat": lat, "lon": lon, "year": loss_year,
                "category": CLASS_CATEGORY[cls], "split": split, "polygon": polygon,
                "image_dir": f"events/{event_id}", "aux_path": f"events/{event_id}/aux.json",
            })
    path = root / "manifest.jsonl"
    write_manifest(records, path)
    return path


def write_manifest(records, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return path


def count_manifest_records(counts, n_dropped=0, seed=0):
    """Manifest records whose kept events reproduce ``counts`` exactly.

    ``counts`` maps split -> class -> n. Categories cycle through every
    original category of a class. ``n_dropped`` extra pre-cutoff records of
    the dropped categories are interleaved; the loader must discard them.
    """
    rng = make_rng(seed, "count-manifest")
    by_class = {c: [k for k, (g, _) in CATEGORY_TABLE.items() if g == c] for c in DriverClass}
    records = []
    idx = 0
    square = [[(10.0, 10.0), (20.0, 10.0), (20.0, 20.0), (10.0, 20.0)]]
    for split in SPLITS:
        for cls in DriverClass:
            cats = by_class[cls]
            for j in range(int(counts[split][cls])):
                cat = cats[j % len(cats)]
                drop = CATEGORY_TABLE[cat][1]
                year = int(rng.integers(TEMPORAL_CUTOFF, 2017)) if drop else int(rng.integers(2001, 2017))
                records.append(_count_record(idx, split, cat, year, square))
                idx += 1
    for j in range(n_dropped):
        cat = DROPPABLE[j % len(DROPPABLE)]
        split = SPLITS[j % len(SPLITS)]
        records.append(_count_record(idx, split, cat, int(rng.integers(2001, TEMPORAL_CUTOFF)), square))
        idx += 1
    order = rng.permutation(len(records))
    return [records[int(i)] for i in order]


def _count_record(idx, split, category, year, polygon):
    # events sit on a 0.1 degree lattice, far beyond one image footprint
    return {"event_id": f"evt-{idx:05d}", "lat": round(-5.0 + 0.1 * (idx % 100), 4),
            "lon": round(100.0 + 0.1 * (idx // 100), 4), "year": year, "category": category,
            "split": split, "polygon": polygon, "image_dir": f"events/evt-{idx:05d}",
            "aux_path": f"events/evt-{idx:05d}/aux.json"}


def make_reference_manifest(path, n_dropped=120, seed=0) -> Path:
    """Full-size manifest whose kept counts equal the released dataset counts."""
    return write_manifest(count_manifest_records(REFERENCE_COUNTS, n_dropped, seed), path)


def make_feature_dataset(n=400, n_features=8, n_informative=4, separation=4.0, seed=0):
    """Four well-separated Gaussian classes in feature space.

    Returns ``(X, y)``. Classes are balanced; class ``c`` is shifted by
    ``separation`` along informative feature ``c``.
    """
    rng = make_rng(seed, "features")
    y = np.arange(n) % 4
    rng.shuffle(y)
    centers = np.eye(4, n_informative) * separation
    X = rng.normal(0.0, 1.0, (n, n_features))
    X[:, :n_informative] += centers[y]
    return X, y
