"""Command-line entry point: ``forestdriver <subcommand> --config <path>``.

Every subcommand reads one JSON config, writes its artifacts under
``--out`` (default ``out/`` next to the config) and embeds the config digest
in them. Module errors end the run with exit status 2 and a JSON error record
on stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, pipeline
from .baselines import GRID_KEYS, fit as fit_baseline, predict_events, save_model, tune_cv
from .config import RunConfig, default_config, load_config
from .errors import ForestDriverError, TruncatedRegion, ValidationError
from .features import write_feature_csv
from .ingest import (REFERENCE_COUNTS, check_spatial_disjoint, compare_counts, format_counts,
                     load_reference_counts)
from .metrics import compute_metrics
from .raster import RasterImage, read_raster, write_raster
from .report import render_class_map, render_report, write_json

log = logging.getLogger("forestdriver")

PREDICTIONS = "predictions.jsonl"
CHECKPOINT = "checkpoint.fdt"


def _counts_json(counts):
    return {s: {c.label: n for c, n in per.items()} for s, per in counts.items()}


def _write_jsonl(records, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return path


def _eval_events(cfg, events):
    return [e for s in cfg.eval.splits for e in sorted(events.split(s), key=lambda e: e.event_id)]


# --------------------------------------------------------------------------
# subcommands


def cmd_ingest(cfg: RunConfig, out: Path, args):
    events = pipeline.load_events(cfg)
    print(format_counts(events.counts))
    overlaps = check_spatial_disjoint(events, cfg.data.window_km)
    reference = REFERENCE_COUNTS
    if args.check_reference not in (None, "published"):
        reference = load_reference_counts(args.check_reference)
    diffs = compare_counts(events.counts, reference)
    write_json({"config_digest": cfg.digest(), "counts": _counts_json(events.counts),
                "totals": events.totals(), "dropped": list(events.dropped),
                "cross_split_overlaps": [list(p) for p in overlaps],
                "reference_mismatches": [list(d) for d in diffs]},
               out / "ingest.json")
    print(f"dropped by temporal filter: {len(events.dropped)}")
    if overlaps:
        print(f"warning: {len(overlaps)} cross-split event pairs overlap", file=sys.stderr)
    if args.check_reference and diffs:
        raise ValidationError(f"{len(diffs)} cells differ from the reference counts",
                              [f"{s}/{c}: {g} != {e}" for s, c, g, e in diffs])
    return 0


def cmd_composite(cfg, out, args):
    events = pipeline.load_events(cfg)
    sets = pipeline.build_scene_sets(events, cfg.composite.exclude_clouds)
    summary = {eid: {"accepted": [s.scene_id for s in ss.scenes],
                     "composite_inputs": list(ss.composite_inputs),
                     "time_window": list(ss.time_window)} for eid, ss in sorted(sets.items())}
    write_json({"config_digest": cfg.digest(), "events": summary}, out / "composite.json")
    print(f"built {len(sets)} scene sets")
    return 0


def _scene_sets(cfg, events):
    return {e.event_id: pipeline.scene_set_for(e, cfg.composite.exclude_clouds) for e in events}


def cmd_features(cfg, out, args):
    events = sorted(pipeline.load_events(cfg), key=lambda e: (e.split, e.event_id))
    sets = _scene_sets(cfg, events)
    groups, visible_only = tuple(cfg.features.groups), cfg.features.visible_only
    names, X, y, ids = pipeline.feature_rows(events, sets, groups, visible_only)
    rows = [(e.event_id, e.split, e.driver.label, x) for e, x in zip(events, X)]
    write_feature_csv(out / "features.csv", rows, names)
    write_json({"config_digest": cfg.digest(), "feature_names": list(names),
                "n_events": len(rows)}, out / "features.json")
    print(f"wrote {len(rows)} feature rows x {len(names)} columns")
    return 0


def cmd_train_baseline(cfg, out, args):
    bcfg = cfg.baseline
    events = pipeline.load_events(cfg)
    train_ev = sorted(events.split("train"), key=lambda e: e.event_id)
    sets = _scene_sets(cfg, list(events))
    names, X, y, groups = pipeline.baseline_rows(train_ev, sets, cfg.features, bcfg, cfg.seed)
    grid = {k: bcfg.grid[k] for k in GRID_KEYS[bcfg.kind]}
    best, results = tune_cv(bcfg.kind, bcfg.mode, X, y, groups, grid, seed=cfg.seed)
    model = fit_baseline(bcfg.kind, bcfg.mode, X, y, best, seed=cfg.seed, feature_names=names)
    save_model(model, out / "baseline.fdt", {"config_digest": cfg.digest(), "cv_results": results,
                                            "predictors": bcfg.predictors})
    records, report = [], {"config_digest": cfg.digest(), "kind": bcfg.kind, "mode": bcfg.mode,
                           "best_params": best, "splits": {}}
    for split in cfg.eval.splits:
        evs = sorted(events.split(split), key=lambda e: e.event_id)
        if not evs:
            continue
        _, Xs, ys, gs = pipeline.baseline_rows(evs, sets, cfg.features, bcfg, cfg.seed)
        preds = predict_events(model, Xs, gs)
        truth = {e.event_id: e.driver for e in evs}
        for eid in sorted(preds):
            records.append({"event_id": eid, "split": split, "true_class": truth[eid].label,
                            "predicted_class": preds[eid].label})
        m = compute_metrics([(truth[g], p) for g, p in sorted(preds.items())],
                            sorted(set(truth) - set(preds)))
        report["splits"][split] = m.to_dict()
        print(f"{split}: accuracy {m.accuracy:.4f} macro-F1 {m.macro_f1:.4f}")
    _write_jsonl(records, out / "baseline_predictions.jsonl")
    write_json(report, out / "baseline_metrics.json")
    return 0


def cmd_train(cfg, out, args):
    from .model.checkpoint import save_checkpoint
    from .model.training import train

    events = pipeline.load_events(cfg)
    train_ev = sorted(events.split("train"), key=lambda e: e.event_id)
    val_ev = sorted(events.split("val"), key=lambda e: e.event_id)
    sets = _scene_sets(cfg, train_ev + val_ev)
    fusion = cfg.train.fusion_enabled
    tr = pipeline.make_examples(train_ev, sets, fusion, cfg.features)
    va = pipeline.make_examples(val_ev, sets, fusion, cfg.features)
    names = ()
    if fusion:
        from .features import feature_names
        names = feature_names(tuple(cfg.features.groups), cfg.features.visible_only)
    tcfg = cfg.train
    if tcfg.pretrained_weights_path:
        tcfg = dataclasses.replace(tcfg, pretrained_weights_path=str(cfg.resolve(tcfg.pretrained_weights_path)))
    res = train(tr, va, cfg.model, tcfg, cfg.augment, bands=cfg.data.bands, feature_names=names,
                eval_crop_size=cfg.eval.crop_size, log_path=out / "train_log.jsonl")
    res.checkpoint.extra["config_digest"] = cfg.digest()
    save_checkpoint(res.checkpoint, out / CHECKPOINT)
    print(f"best epoch {res.checkpoint.epoch} val macro-F1 {res.checkpoint.val_macro_f1:.4f}")
    return 0


def cmd_predict(cfg, out, args):
    from .model.checkpoint import load_checkpoint
    from .model.inference import Predictor, predict_region

    ckpt = load_checkpoint(Path(args.checkpoint) if args.checkpoint else out / CHECKPOINT)
    predictor = Predictor.from_checkpoint(ckpt)
    events = pipeline.load_events(cfg)
    evs = _eval_events(cfg, events)
    sets = _scene_sets(cfg, evs)
    fusion = ckpt.n_aux > 0
    records, excluded = [], []
    for ev in sorted(evs, key=lambda e: e.event_id):
        ss = sets[ev.event_id]
        aux = None
        if fusion:
            aux = pipeline.event_features(ev, ss, tuple(cfg.features.groups),
                                          cfg.features.visible_only).values
        try:
            pred = predict_region(ev, ss, predictor, aux, cfg.eval.crop_size)
        except TruncatedRegion as exc:
            log.warning("%s", exc)
            excluded.append(ev.event_id)
            continue
        rec = pred.record()
        rec["split"] = ev.split
        rec["config_digest"] = cfg.digest()
        records.append(rec)
        write_raster(RasterImage(bands={"class": pred.pixel_classes.astype(np.float32)},
                                 pixel_size=15.0),
                     out / "class_maps" / ev.event_id, nodata=None)
    _write_jsonl(records, out / PREDICTIONS)
    write_json({"config_digest": cfg.digest(), "excluded": excluded,
                "checkpoint_epoch": ckpt.epoch}, out / "predictions.meta.json")
    print(f"predicted {len(records)} events, excluded {len(excluded)}")
    return 0


def cmd_evaluate(cfg, out, args):
    path = Path(args.predictions) if args.predictions else out / PREDICTIONS
    if not path.exists():
        raise ValidationError(f"predictions file {path} not found")
    records = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    meta_path = path.with_name("predictions.meta.json")
    excluded = json.loads(meta_path.read_text())["excluded"] if meta_path.exists() else []
    by_split = {}
    for rec in records:
        if "true_class" in rec:
            by_split.setdefault(rec.get("split", "all"), []).append(rec)
    if not by_split:
        raise ValidationError("no prediction carries a true_class to evaluate against")
    summary = {"config_digest": cfg.digest(), "splits": {}}
    for split in sorted(by_split):
        recs = by_split[split]
        m = compute_metrics([(r["true_class"], r["predicted_class"]) for r in recs], excluded)
        render_report(m, out, prefix=f"{split}_")
        summary["splits"][split] = m.to_dict()
        print(f"{split}: accuracy {m.accuracy:.4f} macro-F1 {m.macro_f1:.4f} (n={m.n_events})")
    write_json(summary, out / "metrics.json")
    maps = path.parent / "class_maps"
    for rec in sorted(records, key=lambda r: r["event_id"]):
        d = maps / rec["event_id"]
        if (d / "meta.json").exists():
            grid = read_raster(d).band("class")
            render_class_map(grid, out / "class_maps_png" / f"{rec['event_id']}.png",
                             title=f"{rec['event_id']}: {rec['predicted_class']}")
    return 0


def cmd_config(cfg, out, args):
    print((default_config() if args.dump_defaults or cfg is None else cfg).to_json())
    return 0


def cmd_make_synthetic(cfg, out, args):
    from .synthetic import make_textured_dataset

    manifest = make_textured_dataset(out, seed=args.seed or 0)
    c = default_config()
    c.data.manifest = manifest.name
    c.augment.crop_size = 64
    c.eval.crop_size = 64
    c.train.epochs = 30
    c.baseline.grid.update({"n_trees": [100], "max_depth": [None], "min_samples_leaf": [1]})
    path = out / "config.json"
    path.write_text(c.to_json() + "\n", encoding="utf-8")
    print(f"wrote synthetic dataset and {path}")
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "composite": cmd_composite,
    "features": cmd_features,
    "train-baseline": cmd_train_baseline,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "config": cmd_config,
    "make-synthetic": cmd_make_synthetic,
}
NO_CONFIG = {"config", "make-synthetic"}


def build_parser():
    p = argparse.ArgumentParser(prog="forestdriver", description="Forest-loss driver classification.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=name not in NO_CONFIG, help="JSON config file")
        sp.add_argument("--seed", type=int, default=None, help="overrides seed and train.seed")
        sp.add_argument("--out", default=None, help="output directory (default: out/ next to config)")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "ingest":
            sp.add_argument("--check-reference", nargs="?", const="published", default=None,
                            metavar="COUNTS_JSON",
                            help="fail unless counts equal the released dataset counts (or a counts JSON)")
        if name == "predict":
            sp.add_argument("--checkpoint", default=None)
        if name == "evaluate":
            sp.add_argument("--predictions", default=None)
        if name == "config":
            sp.add_argument("--dump-defaults", action="store_true")
    return p


def _error_record(exc, command):
    rec = {"error": type(exc).__name__, "message": str(exc), "command": command}
    for attr in ("offending", "line", "parameter"):
        v = getattr(exc, attr, None)
        if v:
            rec[attr] = v
    return json.dumps(rec, sort_keys=True, default=str)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else None
        if cfg is not None and args.seed is not None:
            cfg.seed = args.seed
            cfg.train.seed = args.seed
        if args.out:
            out = Path(args.out)
        elif cfg is not None:
            out = cfg.base_dir / "out"
        else:
            out = Path("out")
        if args.command != "config":
            out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except (ForestDriverError, OSError, KeyError) as exc:
        print(_error_record(exc, args.command), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
