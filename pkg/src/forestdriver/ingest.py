"""Event manifest loading, driver grouping and split checks.

The manifest is JSON Lines, one forest loss event per line::

    {"event_id": "e0001", "lat": -1.2, "lon": 113.5, "year": 2014,
     "category": "Oil palm plantation", "split": "train",
     "polygon": [[[x, y], ...]], "image_dir": "e0001",
     "aux_path": "e0001/aux.json"}

Relative ``image_dir`` / ``aux_path`` values are resolved against the
manifest's directory.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ManifestError, UnknownCategory, ValidationError


class DriverClass(enum.IntEnum):
    """The four driver groups; the integer value is the canonical order."""

    PLANTATION = 0
    SMALLHOLDER_AGRICULTURE = 1
    GRASSLAND_SHRUBLAND = 2
    OTHER = 3

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, value) -> "DriverClass":
        """Accept an int, an enum name or a display label."""
        if isinstance(value, DriverClass):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        text = str(value).strip()
        for member in cls:
            if text in (member.name, member.label) or text.lower() == member.label.lower():
                return member
        raise ValidationError(f"unknown driver class {value!r}")


_LABELS = {
    DriverClass.PLANTATION: "Plantation",
    DriverClass.SMALLHOLDER_AGRICULTURE: "Smallholder agriculture",
    DriverClass.GRASSLAND_SHRUBLAND: "Grassland/shrubland",
    DriverClass.OTHER: "Other",
}

DRIVER_CLASSES = tuple(DriverClass)
N_CLASSES = len(DRIVER_CLASSES)
SPLITS = ("train", "val", "test")

# original category -> (group, drop events before 2012)
CATEGORY_TABLE = {
    "Oil palm plantation": (DriverClass.PLANTATION, False),
    "Timber plantation": (DriverClass.PLANTATION, False),
    "Other large-scale plantations": (DriverClass.PLANTATION, False),
    "Grassland/shrubland": (DriverClass.GRASSLAND_SHRUBLAND, True),
    "Small-scale agriculture": (DriverClass.SMALLHOLDER_AGRICULTURE, False),
    "Small-scale mixed plantation": (DriverClass.SMALLHOLDER_AGRICULTURE, False),
    "Small-scale oil palm plantation": (DriverClass.SMALLHOLDER_AGRICULTURE, False),
    "Mining": (DriverClass.OTHER, False),
    "Fish pond": (DriverClass.OTHER, False),
    "Logging road": (DriverClass.OTHER, True),
    "Secondary forest": (DriverClass.OTHER, True),
    "Other": (DriverClass.OTHER, False),
}
CATEGORIES = tuple(CATEGORY_TABLE)

FIRST_YEAR, LAST_YEAR = 2001, 2016
TEMPORAL_CUTOFF = 2012

# per-split, per-class event counts of the released dataset
REFERENCE_COUNTS = {
    "train": {DriverClass.PLANTATION: 686, DriverClass.SMALLHOLDER_AGRICULTURE: 556,
              DriverClass.GRASSLAND_SHRUBLAND: 143, DriverClass.OTHER: 231},
    "val": {DriverClass.PLANTATION: 219, DriverClass.SMALLHOLDER_AGRICULTURE: 138,
            DriverClass.GRASSLAND_SHRUBLAND: 47, DriverClass.OTHER: 70},
    "test": {DriverClass.PLANTATION: 265, DriverClass.SMALLHOLDER_AGRICULTURE: 207,
             DriverClass.GRASSLAND_SHRUBLAND: 85, DriverClass.OTHER: 112},
}

KM_PER_DEG = 111.32
DEFAULT_WINDOW_KM = 332 * 15 / 1000.0

_REQUIRED = ("event_id", "lat", "lon", "year", "category", "split", "polygon",
             "image_dir", "aux_path")


def group_driver(category: str) -> DriverClass:
    try:
        return CATEGORY_TABLE[category][0]
    except KeyError:
        raise UnknownCategory(f"unknown driver category {category!r}") from None


def temporal_filter(category: str, loss_year: int) -> bool:
    """Return True to keep the event, False to drop it."""
    if category not in CATEGORY_TABLE:
        raise UnknownCategory(f"unknown driver category {category!r}")
    _check_year(loss_year)
    drop_early = CATEGORY_TABLE[category][1]
    return not (drop_early and loss_year < TEMPORAL_CUTOFF)


def _check_year(year):
    if isinstance(year, bool) or not isinstance(year, (int, np.integer)):
        raise ValidationError(f"loss year must be an integer, got {year!r}")
    if not FIRST_YEAR <= year <= LAST_YEAR:
        raise ValidationError(f"loss year {year} outside [{FIRST_YEAR}, {LAST_YEAR}]")


@dataclass(frozen=True)
class ForestLossEvent:
    event_id: str
    lat: float
    lon: float
    loss_year: int
    original_category: str
    driver: DriverClass
    split: str
    polygon: tuple  # tuple of rings, each a tuple of (x, y)
    image_dir: Path
    aux_path: Path

    def polygon_rings(self):
        return [list(ring) for ring in self.polygon]


@dataclass(frozen=True)
class EventSet:
    events: tuple
    counts: dict = field(default_factory=dict)
    dropped: tuple = ()

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def split(self, name):
        return [e for e in self.events if e.split == name]

    def totals(self):
        return {s: sum(self.counts.get(s, {}).values()) for s in SPLITS}


def count_events(events):
    """Per-split, per-class counts with every cell present."""
    counts = {s: {c: 0 for c in DRIVER_CLASSES} for s in SPLITS}
    for e in events:
        counts[e.split][e.driver] += 1
    return counts


def _parse_record(rec, base: Path, lineno: int):
    if not isinstance(rec, dict):
        raise ManifestError("record is not a JSON object", lineno)
    missing = [k for k in _REQUIRED if k not in rec]
    if missing:
        raise ManifestError(f"missing fields {missing}", lineno)
    category = rec["category"]
    if category not in CATEGORY_TABLE:
        raise ManifestError(f"unknown category {category!r}", lineno)
    year = rec["year"]
    try:
        _check_year(year)
    except ValidationError as exc:
        raise ManifestError(str(exc), lineno) from None
    if rec["split"] not in SPLITS:
        raise ManifestError(f"unknown split {rec['split']!r}", lineno)
    try:
        lat = float(rec["lat"])
        lon = float(rec["lon"])
        rings = tuple(
            tuple((float(x), float(y)) for x, y in ring) for ring in rec["polygon"]
        )
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"malformed coordinates: {exc}", lineno) from None
    if not (-90 <= lat <= 90 and -180 <= lon <= 180):
        raise ManifestError("lat/lon out of range", lineno)
    if not rings or any(len(r) < 3 for r in rings):
        raise ManifestError("polygon needs at least one ring of >= 3 vertices", lineno)
    return ForestLossEvent(
        event_id=str(rec["event_id"]),
        lat=lat,
        lon=lon,
        loss_year=int(year),
        original_category=category,
        driver=group_driver(category),
        split=rec["split"],
        polygon=rings,
        image_dir=base / rec["image_dir"],
        aux_path=base / rec["aux_path"],
    )


def load_manifest(path) -> EventSet:
    """Parse a JSON Lines manifest, group drivers and apply the temporal filter."""
    path = Path(path)
    base = path.parent
    kept, dropped = [], []
    seen = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON: {exc.msg}", lineno) from None
            event = _parse_record(rec, base, lineno)
            if event.event_id in seen:
                seen[event.event_id].append(event)
                continue
            seen[event.event_id] = [event]
            if temporal_filter(event.original_category, event.loss_year):
                kept.append(event)
            else:
                dropped.append(event.event_id)
    if not seen:
        raise ManifestError(f"manifest {path} contains no events")
    dupes = sorted(k for k, v in seen.items() if len(v) > 1)
    if dupes:
        raise ValidationError(
            f"{len(dupes)} event ids appear more than once: {dupes[:10]}", dupes
        )
    return EventSet(events=tuple(kept), counts=count_events(kept), dropped=tuple(dropped))


def compare_counts(counts, reference=REFERENCE_COUNTS):
    """List of ``(split, class, got, expected)`` for every mismatching cell."""
    diffs = []
    for s in SPLITS:
        for c in DRIVER_CLASSES:
            got = counts.get(s, {}).get(c, 0)
            want = reference[s][c]
            if got != want:
                diffs.append((s, c.label, got, want))
    return diffs


def format_counts(counts) -> str:
    """Render counts as a plain text table, classes by row and splits by column."""
    header = f"{'Driver class':<26}" + "".join(f"{s:>10}" for s in SPLITS)
    lines = [header, "-" * len(header)]
    for c in DRIVER_CLASSES:
        lines.append(f"{c.label:<26}" + "".join(f"{counts[s][c]:>10,}" for s in SPLITS))
    lines.append("-" * len(header))
    totals = [sum(counts[s].values()) for s in SPLITS]
    lines.append(f"{'Overall':<26}" + "".join(f"{t:>10,}" for t in totals))
    return "\n".join(lines)


def check_spatial_disjoint(events, window_km: float = DEFAULT_WINDOW_KM):
    """Cross-split event pairs whose square image footprints overlap.

    Footprints are ``window_km`` squares centred on each event, compared in a
    local planar frame where longitude differences are scaled by the cosine
    of the mean latitude of the pair. Returns sorted ``(id_a, id_b)`` pairs.
    """
    events = list(events)
    if len(events) < 2:
        return []
    lat = np.array([e.lat for e in events])
    lon = np.array([e.lon for e in events])
    split = np.array([SPLITS.index(e.split) for e in events])
    ids = [e.event_id for e in events]
    order = np.argsort(lat, kind="stable")
    lat, lon, split = lat[order], lon[order], split[order]
    ids = [ids[i] for i in order]
    lat_window = window_km / KM_PER_DEG
    pairs = []
    for i in range(len(events)):
        # candidates within the latitude band only
        j_end = np.searchsorted(lat, lat[i] + lat_window, side="left")
        js = np.arange(i + 1, j_end)
        if len(js) == 0:
            continue
        js = js[split[js] != split[i]]
        if len(js) == 0:
            continue
        mean_lat = np.radians((lat[i] + lat[js]) * 0.5)
        dy = np.abs(lat[js] - lat[i]) * KM_PER_DEG
        dlon = np.abs(lon[js] - lon[i])
        dlon = np.minimum(dlon, 360.0 - dlon)
        dx = dlon * KM_PER_DEG * np.cos(mean_lat)
        hit = js[(dx < window_km) & (dy < window_km)]
        for j in hit:
            a, b = sorted((ids[i], ids[int(j)]))
            pairs.append((a, b))
    return sorted(pairs)


def offset_km(lat, lon, dx_km, dy_km):
    """Move a coordinate by a planar offset; used by fixtures and tests."""
    new_lat = lat + dy_km / KM_PER_DEG
    new_lon = lon + dx_km / (KM_PER_DEG * math.cos(math.radians(lat)))
    return new_lat, new_lon


def load_reference_counts(path):
    """Counts JSON ``{split: {class label: n}}`` keyed back to :class:`DriverClass`."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    raw = raw.get("counts", raw)
    try:
        return {s: {DriverClass.parse(k): int(v) for k, v in raw[s].items()} for s in SPLITS}
    except KeyError as exc:
        raise ValidationError(f"{path}: counts for split {exc} missing") from None


# bundled offline fixture: 60 kept events plus 6 pre-cutoff records that the
# temporal filter removes
FIXTURE_MANIFEST = Path(__file__).parent / "data" / "fixture_manifest.jsonl"
FIXTURE_COUNTS = Path(__file__).parent / "data" / "fixture_counts.json"
# path to the released dataset manifest, when available locally
PUBLISHED_MANIFEST_ENV = "FORESTDRIVER_PUBLISHED_MANIFEST"
