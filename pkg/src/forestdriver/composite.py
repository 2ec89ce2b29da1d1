"""Scene quality filtering, median compositing and inference image choice."""
from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import MissingBand, NoScenes, ShapeMismatch, ValidationError
from .ingest import FIRST_YEAR, LAST_YEAR, TEMPORAL_CUTOFF
from .raster import QA_BANDS, RasterImage, read_raster, write_raster

MAX_CLOUD_FRACTION = 0.5
MIN_COMPOSITE_SCENES = 5
LANDSAT8_FIRST_FULL_YEAR = 2013


def compute_time_window(loss_year: int):
    """Imagery years for an event: the four years after it, or 2013-2016."""
    if isinstance(loss_year, bool) or not isinstance(loss_year, (int, np.integer)):
        raise ValidationError(f"loss year must be an integer, got {loss_year!r}")
    if not FIRST_YEAR <= loss_year <= LAST_YEAR:
        raise ValidationError(f"loss year {loss_year} outside [{FIRST_YEAR}, {LAST_YEAR}]")
    if loss_year >= TEMPORAL_CUTOFF:
        return (int(loss_year) + 1, int(loss_year) + 4)
    return (LANDSAT8_FIRST_FULL_YEAR, LANDSAT8_FIRST_FULL_YEAR + 3)


def qa_fraction(scene: RasterImage, band: str) -> float:
    """Fraction of flagged pixels among the scene's non-nodata pixels."""
    if band not in scene.bands:
        raise MissingBand(f"scene {scene.scene_id!r} has no {band} band")
    valid = ~scene.nodata_mask
    n = int(valid.sum())
    if n == 0:
        return 1.0
    return float(scene.bands[band][valid].sum()) / n


def cloud_fraction(scene):
    return qa_fraction(scene, "qa_cloud")


def cirrus_fraction(scene):
    return qa_fraction(scene, "qa_cirrus")


def scene_ok(scene: RasterImage) -> bool:
    return cloud_fraction(scene) < MAX_CLOUD_FRACTION and cirrus_fraction(scene) == 0.0


def filter_scenes(scenes):
    """Scenes with under 50% cloudy and no cirrus pixels, in input order."""
    return [s for s in scenes if scene_ok(s)]


def median_composite(scenes, exclude_clouds: bool = True) -> RasterImage:
    """Per-band, per-pixel median over the scenes where each pixel is valid.

    A pixel is valid in a scene when it is not nodata and, with
    ``exclude_clouds``, not flagged in ``qa_cloud`` or ``qa_cirrus``. QA bands are
    not carried into the composite. Pixels with no valid scene become nodata.
    """
    scenes = list(scenes)
    if not scenes:
        raise NoScenes("cannot composite an empty scene list")
    first = scenes[0]
    names = [b for b in first.band_names if b not in QA_BANDS]
    for s in scenes[1:]:
        if s.shape != first.shape:
            raise ShapeMismatch("scenes differ in size")
        if [b for b in s.band_names if b not in QA_BANDS] != names:
            raise ShapeMismatch("scenes differ in band set")
    h, w = first.shape
    valid = np.stack([~s.nodata_mask for s in scenes])
    if exclude_clouds:
        for i, s in enumerate(scenes):
            for qa in QA_BANDS:
                if qa in s.bands:
                    valid[i] &= s.bands[qa] == 0
    valid_flat = valid.reshape(len(scenes), -1).astype(np.uint8)
    bands = {}
    ok = None
    for name in names:
        stack = np.stack([s.bands[name] for s in scenes]).reshape(len(scenes), -1)
        med, ok = kernels.masked_median(stack, valid_flat)
        bands[name] = med.reshape(h, w)
    nodata = ~ok.reshape(h, w).astype(bool)
    dates = sorted(s.acquisition_date for s in scenes if s.acquisition_date is not None)
    date_range = (dates[0], dates[-1]) if dates else first.date_range
    return RasterImage(bands=bands, pixel_size=first.pixel_size, origin=first.origin,
                       acquisition_date=None, date_range=date_range, nodata_mask=nodata,
                       scene_id="composite")


def _scene_key(scene: RasterImage):
    return (
        cloud_fraction(scene),
        scene.acquisition_date or dt.date.max,
        scene.scene_id or "",
    )


@dataclass(frozen=True)
class SceneSet:
    event_id: str
    scenes: tuple
    composite: RasterImage
    time_window: tuple
    composite_inputs: tuple = field(default=())

    def options(self):
        """Composite first, then accepted scenes; the support of scene sampling."""
        return (self.composite,) + tuple(self.scenes)


def build_scene_set(event, candidate_scenes, exclude_clouds: bool = True) -> SceneSet:
    """Filter candidates and build the event's composite.

    All accepted scenes are composited when there are at least five;
    otherwise the five least cloudy candidates are used (ties by date, then
    scene id).
    """
    candidates = list(candidate_scenes)
    if not candidates:
        raise NoScenes(f"event {event.event_id}: no candidate scenes")
    window = compute_time_window(event.loss_year)
    outside = [s.scene_id for s in candidates
               if s.acquisition_date is None
               or not window[0] <= s.acquisition_date.year <= window[1]]
    if outside:
        raise ValidationError(
            f"event {event.event_id}: scenes outside {window[0]}-{window[1]}: {outside}", outside)
    accepted = filter_scenes(candidates)
    if len(accepted) >= MIN_COMPOSITE_SCENES:
        inputs = accepted
    else:
        inputs = sorted(candidates, key=_scene_key)[:MIN_COMPOSITE_SCENES]
    comp = median_composite(inputs, exclude_clouds=exclude_clouds)
    accepted = sorted(accepted, key=lambda s: (s.acquisition_date, s.scene_id or ""))
    return SceneSet(event_id=event.event_id, scenes=tuple(accepted), composite=comp,
                    time_window=window,
                    composite_inputs=tuple(s.scene_id for s in inputs))


def select_inference_image(scene_set: SceneSet, loss_year: int) -> RasterImage:
    """Accepted scene dated nearest to July 1 of the loss year, else the composite."""
    if not scene_set.scenes:
        return scene_set.composite
    target = dt.date(int(loss_year), 7, 1)
    return min(scene_set.scenes,
               key=lambda s: (abs((s.acquisition_date - target).days), s.acquisition_date))


# --------------------------------------------------------------------------
# on-disk layout: <image_dir>/scene_<date>/, <image_dir>/composite/, scene_set.json


def scene_dirs(image_dir):
    return sorted(p for p in Path(image_dir).glob("scene_*") if (p / "meta.json").exists())


def load_candidates(image_dir):
    out = []
    for d in scene_dirs(image_dir):
        s = read_raster(d)
        if s.scene_id is None:
            s = RasterImage(bands=s.bands, pixel_size=s.pixel_size, origin=s.origin,
                            acquisition_date=s.acquisition_date, nodata_mask=s.nodata_mask,
                            scene_id=d.name)
        out.append(s)
    return out


def save_scene_set(scene_set: SceneSet, image_dir) -> Path:
    image_dir = Path(image_dir)
    write_raster(scene_set.composite, image_dir / "composite")
    record = {
        "event_id": scene_set.event_id,
        "time_window": list(scene_set.time_window),
        "accepted": [s.scene_id for s in scene_set.scenes],
        "composite_inputs": list(scene_set.composite_inputs),
        "cloud_fraction": {s.scene_id: cloud_fraction(s) for s in scene_set.scenes},
    }
    path = image_dir / "scene_set.json"
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_scene_set(image_dir) -> SceneSet:
    """Read a scene set written by :func:`save_scene_set`."""
    image_dir = Path(image_dir)
    record = json.loads((image_dir / "scene_set.json").read_text(encoding="utf-8"))
    by_id = {s.scene_id: s for s in load_candidates(image_dir)}
    scenes = tuple(by_id[sid] for sid in record["accepted"])
    return SceneSet(event_id=record["event_id"], scenes=scenes,
                    composite=read_raster(image_dir / "composite"),
                    time_window=tuple(record["time_window"]),
                    composite_inputs=tuple(record["composite_inputs"]))
