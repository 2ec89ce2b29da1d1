"""Rasterization, zonal statistics, crops, NDVI, pan-sharpening and raster I/O."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import Polygon

from forestdriver.errors import CropTooLarge, DegenerateGeometry, EmptyRegion, ShapeMismatch
from forestdriver.raster import (
    CENTER_EPS, CropWindow, RasterImage, RegionMask, center_crop, center_window, crop,
    crop_mask, embed, ndvi, pan_sharpen, rasterize_polygon, read_raster, upsample_bilinear,
    write_raster, zonal_stats,
)

from oracles import oracle_mask, star_polygon, zonal_oracle


class TestRasterize:
    def test_single_cell_square(self, backend):
        m = rasterize_polygon([(0.2, 0.2), (0.8, 0.2), (0.8, 0.8), (0.2, 0.8)], 4, 4)
        expected = np.zeros((4, 4), bool)
        expected[0, 0] = True
        assert np.array_equal(m.inside, expected)

    def test_triangle_matches_oracle(self, backend):
        tri = [(0.5, 0.5), (3.5, 0.5), (0.5, 3.5)]
        m = rasterize_polygon(tri, 4, 4)
        assert np.array_equal(m.inside, oracle_mask([tri], 4, 4))
        # nudged centers: the left and top edges are inside, the hypotenuse is not
        assert m.pixel_count == 6

    def test_closed_ring_equals_open_ring(self, backend):
        ring = [(1.0, 1.0), (6.3, 1.2), (5.0, 7.7)]
        a = rasterize_polygon(ring, 8, 8)
        b = rasterize_polygon(ring + [ring[0]], 8, 8)
        assert np.array_equal(a.inside, b.inside)

    def test_hole_ring(self, backend):
        outer = [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]
        hole = [(3.0, 3.0), (7.0, 3.0), (7.0, 7.0), (3.0, 7.0)]
        m = rasterize_polygon([outer, hole], 10, 10)
        assert m.pixel_count == 100 - 16
        assert not m.inside[5, 5]

    def test_degenerate(self, backend):
        with pytest.raises(DegenerateGeometry):
            rasterize_polygon([(0, 0), (3, 3)], 4, 4)
        with pytest.raises(DegenerateGeometry):
            rasterize_polygon([(0, 0), (1, 1), (2, 2)], 4, 4)

    def test_empty_region(self, backend):
        tiny = [(0.1, 0.1), (0.2, 0.1), (0.2, 0.2)]
        with pytest.raises(EmptyRegion):
            rasterize_polygon(tiny, 4, 4)
        assert rasterize_polygon(tiny, 4, 4, allow_empty=True).pixel_count == 0

    @pytest.mark.parametrize("seed", range(20))
    def test_random_polygons_match_two_oracles(self, backend, seed):
        rng = np.random.default_rng(seed)
        w, h = int(rng.integers(4, 33)), int(rng.integers(4, 33))
        ring = star_polygon(rng, w / 2, h / 2, 1.0, min(w, h) / 1.5, int(rng.integers(3, 12)))
        m = rasterize_polygon(ring, w, h, allow_empty=True)
        assert np.array_equal(m.inside, oracle_mask([ring], w, h))
        poly = Polygon(ring)
        if poly.is_valid:
            cols, rows = np.meshgrid(np.arange(w), np.arange(h))
            from shapely import contains_xy

            ref = contains_xy(poly, cols + 0.5 + CENTER_EPS, rows + 0.5 + CENTER_EPS)
            assert np.array_equal(m.inside, ref)


class TestZonalStats:
    def test_single_pixel(self):
        band = np.zeros((3, 3))
        band[1, 1] = 7
        mask = np.zeros((3, 3), bool)
        mask[1, 1] = True
        assert zonal_stats(band, mask) == {"mean": 7.0, "std": 0.0, "min": 7.0, "max": 7.0}

    def test_three_values(self):
        band = np.array([[1.0, 2.0, 3.0]])
        s = zonal_stats(band, np.ones((1, 3), bool))
        assert s["mean"] == 2.0 and s["min"] == 1.0 and s["max"] == 3.0
        assert s["std"] == pytest.approx(math.sqrt(2 / 3), rel=1e-15)

    def test_nodata_excluded(self):
        band = np.array([[5.0, 5.0, -9999.0]])
        nodata = np.array([[False, False, True]])
        assert zonal_stats(band, np.ones((1, 3), bool), nodata) == {
            "mean": 5.0, "std": 0.0, "min": 5.0, "max": 5.0}

    def test_all_nodata(self):
        with pytest.raises(EmptyRegion):
            zonal_stats(np.ones((2, 2)), np.ones((2, 2), bool), np.ones((2, 2), bool))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            zonal_stats(np.ones((2, 2)), np.ones((3, 3), bool))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        band = rng.normal(100, 30, (12, 9)).astype(np.float32)
        mask = rng.random((12, 9)) < 0.4
        mask[0, 0] = True
        ref = zonal_oracle(band, mask)
        s = zonal_stats(band, RegionMask(mask))
        assert s["mean"] == pytest.approx(ref["mean"], rel=1e-12)
        assert s["std"] == pytest.approx(ref["std"], rel=1e-12, abs=1e-12)
        assert s["min"] == ref["min"] and s["max"] == ref["max"]


class TestCrops:
    def test_center_window_values(self):
        assert center_window(332, 332, 160) == CropWindow(86, 86, 160)
        assert center_window(160, 160, 160) == CropWindow(0, 0, 160)
        with pytest.raises(CropTooLarge):
            center_window(100, 100, 160)

    def test_crop_embed_roundtrip(self):
        rng = np.random.default_rng(0)
        img = RasterImage(bands={"red": rng.random((20, 20))})
        sub, win = center_crop(img, 8)
        back = embed(img.band("red"), sub.band("red"), win)
        assert np.array_equal(back, img.band("red"))
        assert np.array_equal(sub.band("red"), img.band("red")[6:14, 6:14])

    def test_origin_moves_with_crop(self):
        img = RasterImage(bands={"red": np.zeros((10, 10))}, origin=(110.0, -1.0))
        sub = crop(img, CropWindow(2, 3, 4))
        assert sub.origin[0] > 110.0 and sub.origin[1] < -1.0

    def test_crop_mask(self):
        m = RegionMask(np.eye(6, dtype=bool))
        assert crop_mask(m, CropWindow(1, 1, 3)).pixel_count == 3


class TestNdviPan:
    def test_ndvi_cases(self):
        v, nd = ndvi(np.array([[0.6, 0.3, 0.0]]), np.array([[0.2, 0.3, 0.0]]))
        assert v[0, 0] == pytest.approx(0.5, abs=1e-7)
        assert v[0, 1] == 0.0
        assert nd.tolist() == [[False, False, True]]

    @given(st.integers(0, 2**32 - 1))
    def test_ndvi_range(self, seed):
        rng = np.random.default_rng(seed)
        v, nd = ndvi(rng.random((5, 5)), rng.random((5, 5)))
        assert np.all((v[~nd] >= -1) & (v[~nd] <= 1))

    def test_ndvi_shape(self):
        with pytest.raises(ShapeMismatch):
            ndvi(np.ones((2, 2)), np.ones((2, 3)))

    def test_brovey(self):
        rgb = [np.full((2, 2), 0.2)] * 3
        out = pan_sharpen(rgb, np.full((4, 4), 0.4))
        for b in out:
            assert np.allclose(b, 0.4, atol=1e-7)
        zeros = pan_sharpen([np.zeros((2, 2))] * 3, np.full((4, 4), 0.7))
        assert all(np.all(b == 0) for b in zeros)

    def test_constant_chroma_luminance_equals_pan(self):
        rng = np.random.default_rng(3)
        base = rng.uniform(0.1, 0.5, (4, 4))
        rgb = [base * 0.8, base, base * 1.2]
        pan = rng.uniform(0.1, 0.6, (8, 8))
        out = pan_sharpen(rgb, pan)
        lum = (out[0].astype(np.float64) + out[1] + out[2]) / 3
        assert np.allclose(lum, pan, rtol=0, atol=1e-6)

    def test_ratio_check(self):
        with pytest.raises(ShapeMismatch):
            pan_sharpen([np.ones((2, 2))] * 3, np.ones((5, 5)))

    def test_upsample_constant(self):
        assert np.allclose(upsample_bilinear(np.full((3, 3), 2.5), 2), 2.5)


class TestContainer:
    def test_roundtrip_bit_exact(self, tmp_path):
        import datetime as dt

        rng = np.random.default_rng(1)
        nd = rng.random((5, 7)) < 0.2
        img = RasterImage(bands={"red": rng.random((5, 7)), "qa_cloud": (rng.random((5, 7)) < 0.5)},
                          pixel_size=15.0, origin=(101.5, -0.25),
                          acquisition_date=dt.date(2016, 2, 3), nodata_mask=nd, scene_id="s1")
        write_raster(img, tmp_path / "r")
        raw = np.fromfile(tmp_path / "r" / "red.f32", dtype="<f4").reshape(5, 7)
        assert np.array_equal(raw[~nd], img.band("red")[~nd])
        assert np.all(raw[nd] == -9999.0)
        back = read_raster(tmp_path / "r")
        assert np.array_equal(back.nodata_mask, nd)
        assert np.array_equal(back.band("qa_cloud"), img.band("qa_cloud"))
        assert back.acquisition_date == img.acquisition_date and back.origin == img.origin

    def test_qa_must_be_binary(self):
        from forestdriver.errors import ValidationError

        with pytest.raises(ValidationError):
            RasterImage(bands={"qa_cloud": np.full((2, 2), 0.5)})
