"""Glue between the on-disk dataset layout and the modeling modules."""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .composite import build_scene_set, load_candidates, load_scene_set, save_scene_set
from .config import BaselineConfig, FeatureConfig, RunConfig
from .errors import ValidationError
from .features import GROUP_ORDER, VISIBLE, build_feature_vector, feature_names, load_predictor_table
from .ingest import load_manifest
from .model.training import Example
from .raster import rasterize_polygon
from .rng import make_rng

log = logging.getLogger(__name__)

PREDICTOR_SETS = ("visible", "visible+aux", "all")


def load_events(cfg: RunConfig):
    return load_manifest(cfg.resolve(cfg.data.manifest))


def build_scene_sets(events, exclude_clouds=True, save=True):
    """Filter and composite every event's scenes; write them next to the scenes."""
    out = {}
    for ev in events:
        ss = build_scene_set(ev, load_candidates(ev.image_dir), exclude_clouds)
        if save:
            save_scene_set(ss, ev.image_dir)
        out[ev.event_id] = ss
    return out


def scene_set_for(event, exclude_clouds=True):
    """Stored scene set of an event, built on first use."""
    if (Path(event.image_dir) / "scene_set.json").exists():
        return load_scene_set(event.image_dir)
    ss = build_scene_set(event, load_candidates(event.image_dir), exclude_clouds)
    save_scene_set(ss, event.image_dir)
    return ss


def region_mask(event, image):
    return rasterize_polygon(event.polygon_rings(), image.width, image.height, allow_empty=True)


def feature_selection(feature_cfg: FeatureConfig, predictors="all"):
    """``(groups, visible_only)`` for a predictor set name."""
    if predictors == "visible":
        return ("imaging",), True
    if predictors == "visible+aux":
        return tuple(feature_cfg.groups), True
    if predictors == "all":
        return tuple(feature_cfg.groups), feature_cfg.visible_only
    raise ValidationError(f"unknown predictor set {predictors!r}; expected one of {PREDICTOR_SETS}")


def event_features(event, scene_set, groups=GROUP_ORDER, visible_only=False):
    """Aux feature vector of one event over its composite."""
    table = load_predictor_table(event.aux_path)
    comp = scene_set.composite
    return build_feature_vector(event, table, region_mask(event, comp), comp, groups, visible_only)


def feature_rows(events, scene_sets, groups=GROUP_ORDER, visible_only=False):
    """Region-level rows: ``(names, X, y, ids)``."""
    names = feature_names(groups, visible_only)
    X, y, ids = [], [], []
    for ev in events:
        vec = event_features(ev, scene_sets[ev.event_id], groups, visible_only)
        X.append(vec.values)
        y.append(int(ev.driver))
        ids.append(ev.event_id)
    return names, np.asarray(X, dtype=np.float64).reshape(len(ids), len(names)), np.asarray(y), ids


def pixel_rows(events, scene_sets, feature_cfg: FeatureConfig, predictors="visible",
               max_pixels=200, seed=0):
    """Pixel-level rows: composite band values per region pixel.

    With aux predictors, the event's non-imaging region features are appended
    to each of its pixel rows. At most ``max_pixels`` pixels per event are
    drawn, deterministically from ``seed``.
    """
    groups, _ = feature_selection(feature_cfg, predictors)
    aux_groups = tuple(g for g in groups if g != "imaging")
    bands = list(VISIBLE)
    names = list(bands)
    if aux_groups:
        names += list(feature_names(aux_groups))
    X, y, ids = [], [], []
    for ev in events:
        comp = scene_sets[ev.event_id].composite
        inside = region_mask(ev, comp).inside & ~comp.nodata_mask
        idx = np.flatnonzero(inside)
        if idx.size == 0:
            log.warning("event %s has no valid region pixel; skipped", ev.event_id)
            continue
        if idx.size > max_pixels:
            idx = np.sort(make_rng(seed, "pixels", ev.event_id).choice(idx, max_pixels, replace=False))
        vals = np.stack([comp.band(b).reshape(-1)[idx].astype(np.float64) for b in bands], axis=1)
        if aux_groups:
            aux = event_features(ev, scene_sets[ev.event_id], aux_groups).values
            vals = np.hstack([vals, np.broadcast_to(aux, (len(idx), aux.size))])
        X.append(vals)
        y.extend([int(ev.driver)] * len(idx))
        ids.extend([ev.event_id] * len(idx))
    if not X:
        raise ValidationError("no pixel rows could be built")
    return tuple(names), np.vstack(X), np.asarray(y), ids


def baseline_rows(events, scene_sets, feature_cfg: FeatureConfig, bcfg: BaselineConfig, seed=0):
    if bcfg.mode == "pixel":
        return pixel_rows(events, scene_sets, feature_cfg, bcfg.predictors,
                          bcfg.max_pixels_per_event, seed)
    groups, visible_only = feature_selection(feature_cfg, bcfg.predictors)
    return feature_rows(events, scene_sets, groups, visible_only)


def make_examples(events, scene_sets, fusion=False, feature_cfg: FeatureConfig | None = None):
    """Training examples; aux vectors are attached when fusion is on."""
    out = []
    feature_cfg = feature_cfg or FeatureConfig()
    for ev in events:
        ss = scene_sets[ev.event_id]
        aux = None
        if fusion:
            aux = event_features(ev, ss, tuple(feature_cfg.groups), feature_cfg.visible_only).values
        out.append(Example(ev, ss, aux))
    return out
