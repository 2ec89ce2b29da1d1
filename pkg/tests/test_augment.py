"""Scene sampling, geometric and intensity transforms, training crops."""
import datetime as dt
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_scene
from forestdriver.augment import (
    apply_atmosphere, apply_salt_pepper, augment_example, blend_white, crop_train,
    sda_sample, value_noise, warp_affine,
)
from forestdriver.composite import SceneSet, median_composite
from forestdriver.config import AugmentConfig
from forestdriver.raster import CropWindow, RasterImage, RegionMask
from forestdriver.rng import make_rng

# upper 1% point of the chi-square distribution with 4 degrees of freedom
CHI2_4DF_99 = 13.2767


def rgb(h=8, w=8, seed=0):
    rng = np.random.default_rng(seed)
    bands = {b: rng.random((h, w)).astype(np.float32) for b in ("red", "green", "blue")}
    return RasterImage(bands=bands, acquisition_date=dt.date(2015, 1, 1))


def scene_set(n):
    scenes = [make_scene(np.full((2, 2), float(i)), date=dt.date(2015, i + 1, 1), scene_id=f"s{i}")
              for i in range(n)]
    comp = median_composite(scenes or [make_scene(np.zeros((2, 2)))])
    return SceneSet("e", tuple(scenes), comp, (2015, 2018))


class TestSDA:
    def test_no_scenes(self):
        ss = scene_set(0)
        rng = make_rng(0)
        assert all(sda_sample(ss, rng) is ss.composite for _ in range(50))

    def test_uniform_chi_square(self):
        ss = scene_set(4)
        rng = make_rng(1)
        n = 20000
        opts = ss.options()
        ids = {id(o): i for i, o in enumerate(opts)}
        counts = Counter(ids[id(sda_sample(ss, rng))] for _ in range(n))
        expected = n / 5
        chi2 = sum((counts[i] - expected) ** 2 / expected for i in range(5))
        assert chi2 < CHI2_4DF_99

    def test_disabled(self):
        ss = scene_set(4)
        for _ in range(10):
            assert sda_sample(ss, make_rng(2), enabled=False, loss_year=2014) is ss.scenes[0]


class TestAffine:
    def test_identity(self):
        img = rgb()
        mask = RegionMask(np.random.default_rng(0).random((8, 8)) < 0.5)
        out, m = warp_affine(img, mask)
        for b in img.bands:
            assert np.array_equal(out.band(b), img.band(b))
        assert np.array_equal(m.inside, mask.inside)
        assert not out.nodata_mask.any()

    def test_flip_and_involution(self):
        img = rgb(5, 7)
        mask = RegionMask(np.random.default_rng(1).random((5, 7)) < 0.5)
        out, m = warp_affine(img, mask, flip_h=True)
        assert np.array_equal(out.band("red"), img.band("red")[:, ::-1])
        assert np.array_equal(m.inside, mask.inside[:, ::-1])
        back, mb = warp_affine(out, m, flip_h=True)
        assert np.array_equal(back.band("red"), img.band("red"))
        assert np.array_equal(mb.inside, mask.inside)

    def test_rot90_pattern(self):
        pattern = np.array([[1, 2, 3], [4, 5, 6], [7, 8, 9]], np.float32)
        # hand-computed: the right column becomes the top row
        rotated = np.array([[3, 6, 9], [2, 5, 8], [1, 4, 7]], np.float32)
        img = RasterImage(bands={"red": pattern})
        mask = RegionMask(pattern == 3)
        out, m = warp_affine(img, mask, angle_deg=90.0)
        assert np.array_equal(out.band("red"), rotated)
        assert np.array_equal(m.inside, rotated == 3)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-30, 30), st.floats(0.8, 1.2), st.floats(-2, 2), st.floats(-2, 2),
           st.booleans(), st.booleans())
    def test_mask_alignment(self, angle, scale, tx, ty, fh, fv):
        # an indicator image and its mask must move together
        rng = np.random.default_rng(3)
        inside = rng.random((12, 12)) < 0.4
        ind = RasterImage(bands={"qa_cloud": inside.astype(np.float32)})
        out, m = warp_affine(ind, RegionMask(inside), angle, scale, (tx, ty), fh, fv)
        valid = ~out.nodata_mask
        assert np.array_equal(m.inside[valid], out.band("qa_cloud")[valid] == 1)
        assert out.shape == (12, 12)


class TestIntensity:
    def test_salt_pepper_zero(self):
        img = rgb()
        out = apply_salt_pepper(img, make_rng(0), 0.0)
        assert np.array_equal(out.band("red"), img.band("red"))

    def test_salt_pepper_full(self):
        img = rgb()
        out = apply_salt_pepper(img, make_rng(0), 1.0)
        for b in img.bands:
            g = img.band(b)
            assert np.all((out.band(b) == g.min()) | (out.band(b) == g.max()))

    def test_salt_pepper_count(self):
        img = rgb(10, 10, seed=4)
        out = apply_salt_pepper(img, make_rng(5), 0.1)
        changed = np.zeros((10, 10), bool)
        for b in img.bands:
            changed |= out.band(b) != img.band(b)
        # a chosen pixel can already hold the extreme value, never more than 10 change
        assert changed.sum() <= 10
        extremes = np.zeros((10, 10), bool)
        for b in img.bands:
            g = img.band(b)
            extremes |= (out.band(b) == g.min()) | (out.band(b) == g.max())
        assert changed.sum() >= 9 and extremes.sum() >= 10

    def test_blend_examples(self):
        img = RasterImage(bands={"red": np.full((3, 3), 0.2, np.float32)})
        assert np.allclose(blend_white(img, 0.5).band("red"), 0.6, atol=1e-7)
        assert np.all(blend_white(img, 1.0, white_level=0.8).band("red") == np.float32(0.8))
        assert np.array_equal(blend_white(img, 0.0).band("red"), img.band("red"))

    def test_zero_alpha_atmosphere(self):
        cfg = AugmentConfig(cloud_alpha=[0, 0], haze_alpha=[0, 0], fog_alpha=[0, 0],
                            cloud_prob=1, haze_prob=1, fog_prob=1)
        img = rgb()
        out = apply_atmosphere(img, make_rng(0), cfg)
        assert np.array_equal(out.band("red"), img.band("red"))

    def test_value_noise_range(self):
        f = value_noise((33, 20), make_rng(0))
        assert f.min() == 0.0 and f.max() == 1.0


class TestCrop:
    def test_full_mask_always_usable(self):
        img = rgb(20, 20)
        mask = RegionMask(np.ones((20, 20), bool))
        cfg = AugmentConfig(crop_size=8, max_crop_retries=0)
        rng = make_rng(0)
        assert all(crop_train(img, mask, rng, cfg)[2] for _ in range(50))

    def test_forced_truncation(self):
        img = RasterImage(bands={"red": np.zeros((332, 332), np.float32)})
        inside = np.zeros((332, 332), bool)
        inside[:10, :10] = True
        cfg = AugmentConfig(crop_size=160)
        out, m, usable = crop_train(img, RegionMask(inside), make_rng(0), cfg,
                                    window=CropWindow(172, 172, 160))
        assert usable is False and m.pixel_count == 0 and out.shape == (160, 160)

    def test_retries_raise_hit_rate(self):
        img = RasterImage(bands={"red": np.zeros((40, 40), np.float32)})
        inside = np.zeros((40, 40), bool)
        inside[:5, :5] = True
        mask = RegionMask(inside)
        n = 2000
        rate = {}
        for retries in (0, 5):
            cfg = AugmentConfig(crop_size=20, max_crop_retries=retries)
            rng = make_rng(9, retries)
            rate[retries] = sum(crop_train(img, mask, rng, cfg)[2] for _ in range(n)) / n
        # a single window hits with probability 5*5/(21*21)
        assert rate[0] == pytest.approx(25 / 441, abs=0.025)
        assert rate[5] > rate[0] + 0.1


def test_pipeline_deterministic_and_shape_preserving():
    img = rgb(40, 40, seed=2)
    mask = RegionMask(np.pad(np.ones((10, 10), bool), 15))
    cfg = AugmentConfig(crop_size=24, cloud_prob=1, haze_prob=1, fog_prob=1, salt_pepper_prob=1,
                        affine_prob=1)
    a = augment_example(img, mask, make_rng(0, "e", 1), cfg)
    b = augment_example(img, mask, make_rng(0, "e", 1), cfg)
    for name in img.bands:
        assert np.array_equal(a[0].band(name), b[0].band(name))
    assert np.array_equal(a[1].inside, b[1].inside) and a[2] == b[2]
    assert a[0].shape == (24, 24) and a[0].band_names == img.band_names
    assert a[0].band("red").max() <= cfg.white_level
