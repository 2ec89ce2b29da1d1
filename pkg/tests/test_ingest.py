"""Category grouping, temporal filter, manifest loading and split disjointness."""
import json
import os

import pytest

from forestdriver.errors import ManifestError, UnknownCategory, ValidationError
from forestdriver.ingest import (
    CATEGORY_TABLE, FIXTURE_COUNTS, FIXTURE_MANIFEST, REFERENCE_COUNTS, DriverClass,
    check_spatial_disjoint, compare_counts, format_counts, group_driver, load_manifest,
    load_reference_counts, offset_km, temporal_filter,
)
from forestdriver.synthetic import make_reference_manifest, write_manifest

D = DriverClass

# (category, group, drop pre-2012), transcribed from the category table
CATEGORY_ROWS = [
    ("Oil palm plantation", D.PLANTATION, False),
    ("Timber plantation", D.PLANTATION, False),
    ("Other large-scale plantations", D.PLANTATION, False),
    ("Grassland/shrubland", D.GRASSLAND_SHRUBLAND, True),
    ("Small-scale agriculture", D.SMALLHOLDER_AGRICULTURE, False),
    ("Small-scale mixed plantation", D.SMALLHOLDER_AGRICULTURE, False),
    ("Small-scale oil palm plantation", D.SMALLHOLDER_AGRICULTURE, False),
    ("Mining", D.OTHER, False),
    ("Fish pond", D.OTHER, False),
    ("Logging road", D.OTHER, True),
    ("Secondary forest", D.OTHER, True),
    ("Other", D.OTHER, False),
]


def record(event_id="e1", **over):
    rec = {"event_id": event_id, "lat": -1.0, "lon": 110.0, "year": 2014,
           "category": "Mining", "split": "train",
           "polygon": [[[1, 1], [5, 1], [5, 5]]], "image_dir": "x", "aux_path": "x/aux.json"}
    rec.update(over)
    return rec


class TestGrouping:
    @pytest.mark.parametrize("category,group,drop", CATEGORY_ROWS)
    def test_table_rows(self, category, group, drop):
        assert group_driver(category) == group
        assert temporal_filter(category, 2011) is (not drop)
        assert temporal_filter(category, 2012) is True

    def test_surjective(self):
        assert {group_driver(c) for c in CATEGORY_TABLE} == set(DriverClass)
        assert len(CATEGORY_TABLE) == 12

    def test_examples(self):
        assert group_driver("Oil palm plantation") == D.PLANTATION
        assert group_driver("Fish pond") == D.OTHER
        assert group_driver("Small-scale mixed plantation") == D.SMALLHOLDER_AGRICULTURE
        assert temporal_filter("Grassland/shrubland", 2010) is False
        assert temporal_filter("Grassland/shrubland", 2013) is True
        assert temporal_filter("Mining", 2005) is True

    def test_unknown(self):
        with pytest.raises(UnknownCategory):
            group_driver("Cattle ranch")

    def test_parse_labels(self):
        assert DriverClass.parse("Smallholder agriculture") == D.SMALLHOLDER_AGRICULTURE
        assert DriverClass.parse(3) == D.OTHER
        assert [c.label for c in DriverClass] == [
            "Plantation", "Smallholder agriculture", "Grassland/shrubland", "Other"]


class TestManifest:
    def test_fixture_counts(self):
        es = load_manifest(FIXTURE_MANIFEST)
        ref = load_reference_counts(FIXTURE_COUNTS)
        assert compare_counts(es.counts, ref) == []
        assert len(es) == 60
        assert len(es.dropped) == json.loads(FIXTURE_COUNTS.read_text())["dropped"]
        assert all(temporal_filter(e.original_category, e.loss_year) for e in es)

    def test_generated_full_size_manifest(self, tmp_path):
        path = make_reference_manifest(tmp_path / "m.jsonl", n_dropped=50)
        es = load_manifest(path)
        assert es.totals() == {"train": 1616, "val": 474, "test": 669}
        assert es.counts["train"][D.PLANTATION] == 686
        assert compare_counts(es.counts, REFERENCE_COUNTS) == []
        assert len(es.dropped) == 50

    def test_empty_file(self, tmp_path):
        p = tmp_path / "m.jsonl"
        p.write_text("")
        with pytest.raises(ManifestError):
            load_manifest(p)

    def test_bad_json_reports_line(self, tmp_path):
        p = tmp_path / "m.jsonl"
        p.write_text(json.dumps(record()) + "\n{not json\n")
        with pytest.raises(ManifestError) as exc:
            load_manifest(p)
        assert exc.value.line == 2

    @pytest.mark.parametrize("bad", [{"year": 1999}, {"category": "Cattle"}, {"split": "dev"},
                                     {"lat": 95.0}, {"polygon": [[[0, 0], [1, 1]]]}])
    def test_invalid_fields(self, tmp_path, bad):
        p = write_manifest([record(**bad)], tmp_path / "m.jsonl")
        with pytest.raises(ManifestError):
            load_manifest(p)

    def test_duplicate_ids(self, tmp_path):
        p = write_manifest([record("a"), record("a", split="test")], tmp_path / "m.jsonl")
        with pytest.raises(ValidationError) as exc:
            load_manifest(p)
        assert exc.value.offending == ["a"]

    def test_deterministic(self, tmp_path):
        p = write_manifest([record("a"), record("b", year=2005, category="Logging road")],
                           tmp_path / "m.jsonl")
        a, b = load_manifest(p), load_manifest(p)
        assert a == b
        assert a.dropped == ("b",)

    def test_format_counts(self):
        text = format_counts(REFERENCE_COUNTS)
        assert "1,616" in text and "474" in text and "669" in text

    @pytest.mark.skipif(not os.environ.get("FORESTDRIVER_PUBLISHED_MANIFEST"),
                        reason="published manifest not available offline")
    def test_published_manifest(self):
        es = load_manifest(os.environ["FORESTDRIVER_PUBLISHED_MANIFEST"])
        assert compare_counts(es.counts) == []


class TestDisjoint:
    def _events(self, tmp_path, recs):
        return list(load_manifest(write_manifest(recs, tmp_path / "m.jsonl")))

    def test_far_apart(self, tmp_path):
        lat, lon = offset_km(-1.0, 110.0, 100.0, 0.0)
        evs = self._events(tmp_path, [record("a"), record("b", lat=lat, lon=lon, split="test")])
        assert check_spatial_disjoint(evs) == []

    def test_same_point_cross_split(self, tmp_path):
        evs = self._events(tmp_path, [record("a"), record("b", split="test")])
        assert check_spatial_disjoint(evs) == [("a", "b")]

    def test_same_split_ignored(self, tmp_path):
        lat, lon = offset_km(-1.0, 110.0, 4.0, 0.0)
        evs = self._events(tmp_path, [record("a"), record("b", lat=lat, lon=lon)])
        assert check_spatial_disjoint(evs) == []

    def test_footprint_oracle(self, tmp_path):
        # squares of side w overlap iff both center offsets are below w
        w = 4.98
        for dx, dy, hit in [(4.0, 0.0, True), (4.0, 4.9, True), (5.1, 0.0, False), (0.0, 5.2, False)]:
            lat, lon = offset_km(-1.0, 110.0, dx, dy)
            evs = self._events(tmp_path, [record("a"), record("b", lat=lat, lon=lon, split="val")])
            assert (check_spatial_disjoint(evs, w) == [("a", "b")]) is hit
