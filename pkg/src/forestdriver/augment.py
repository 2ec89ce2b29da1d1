"""Training-time augmentation: scene sampling, affine warps, noise, atmosphere, crops.

Masks only ever receive geometric transforms. Every function takes an
explicit ``numpy.random.Generator``; see :mod:`forestdriver.rng`.
"""
from __future__ import annotations

import math

import numpy as np

from .composite import SceneSet, select_inference_image
from .config import AugmentConfig
from .errors import CropTooLarge
from .raster import QA_BANDS, CropWindow, RasterImage, RegionMask, crop, crop_mask


def sda_sample(scene_set: SceneSet, rng, enabled: bool = True, loss_year=None) -> RasterImage:
    """Uniform draw over the composite and the accepted scenes.

    With ``enabled=False`` this returns the inference-time image instead,
    which needs ``loss_year``.
    """
    if not enabled:
        return select_inference_image(scene_set, loss_year)
    options = scene_set.options()
    return options[int(rng.integers(len(options)))]


# --------------------------------------------------------------------------
# affine


def _snap(v):
    for target in (-1.0, 0.0, 1.0):
        if abs(v - target) < 1e-12:
            return target
    return v


def affine_matrix(angle_deg=0.0, scale=1.0, flip_h=False, flip_v=False):
    """2x2 forward matrix acting on centered (x, y) pixel coordinates."""
    t = math.radians(angle_deg)
    c, s = _snap(math.cos(t)), _snap(math.sin(t))
    rot = np.array([[c, s], [-s, c]])
    flip = np.diag([-1.0 if flip_h else 1.0, -1.0 if flip_v else 1.0])
    return scale * rot @ flip


def draw_affine(rng, config: AugmentConfig, shape):
    """Random affine parameters as a dict accepted by :func:`warp_affine`."""
    h, w = shape
    params = {"angle_deg": 0.0, "scale": 1.0, "shift": (0.0, 0.0),
              "flip_h": bool(rng.random() < config.flip_h_prob),
              "flip_v": bool(rng.random() < config.flip_v_prob)}
    if rng.random() < config.affine_prob:
        params["angle_deg"] = float(rng.uniform(-config.rotation_deg, config.rotation_deg))
        lo, hi = config.scale_range
        params["scale"] = float(rng.uniform(lo, hi))
        tx = float(rng.uniform(-config.translate_frac, config.translate_frac)) * w
        ty = float(rng.uniform(-config.translate_frac, config.translate_frac)) * h
        params["shift"] = (tx, ty)
    return params


def _source_coords(shape, angle_deg, scale, shift, flip_h, flip_v):
    h, w = shape
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    inv = np.linalg.inv(affine_matrix(angle_deg, scale, flip_h, flip_v))
    inv = np.vectorize(_snap)(inv)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx = xx - cx - shift[0]
    dy = yy - cy - shift[1]
    sx = inv[0, 0] * dx + inv[0, 1] * dy + cx
    sy = inv[1, 0] * dx + inv[1, 1] * dy + cy
    return sx, sy


def warp_affine(image: RasterImage, mask: RegionMask, angle_deg=0.0, scale=1.0,
                shift=(0.0, 0.0), flip_h=False, flip_v=False):
    """Apply one affine transform to an image (bilinear) and its mask (nearest).

    Output pixels that sample outside the source become nodata in the image
    and outside in the mask.
    """
    h, w = image.shape
    sx, sy = _source_coords((h, w), angle_deg, scale, shift, flip_h, flip_v)
    tol = 1e-9
    inb = (sx >= -tol) & (sx <= w - 1 + tol) & (sy >= -tol) & (sy <= h - 1 + tol)
    sxc = np.clip(sx, 0, w - 1)
    syc = np.clip(sy, 0, h - 1)
    x0 = np.floor(sxc).astype(int)
    y0 = np.floor(syc).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sxc - x0
    fy = syc - y0
    w00 = (1 - fx) * (1 - fy)
    w01 = fx * (1 - fy)
    w10 = (1 - fx) * fy
    w11 = fx * fy
    src_nd = image.nodata_mask
    nd = ~inb | (src_nd[y0, x0] & (w00 > 0)) | (src_nd[y0, x1] & (w01 > 0)) \
        | (src_nd[y1, x0] & (w10 > 0)) | (src_nd[y1, x1] & (w11 > 0))
    bands = {}
    for name, g in image.bands.items():
        g = g.astype(np.float64)
        if name in QA_BANDS:
            xn = np.floor(sxc + 0.5).astype(int)
            yn = np.floor(syc + 0.5).astype(int)
            out = g[yn, xn]
        else:
            out = w00 * g[y0, x0] + w01 * g[y0, x1] + w10 * g[y1, x0] + w11 * g[y1, x1]
        out = np.where(nd, 0.0, out)
        bands[name] = out.astype(np.float32)
    xn = np.clip(np.floor(sx + 0.5), 0, w - 1).astype(int)
    yn = np.clip(np.floor(sy + 0.5), 0, h - 1).astype(int)
    near_in = (sx > -0.5) & (sx < w - 0.5) & (sy > -0.5) & (sy < h - 0.5)
    new_mask = mask.inside[yn, xn] & near_in
    return image.with_bands(bands, nodata_mask=nd), RegionMask(new_mask)


def apply_affine(image, mask, rng, config: AugmentConfig):
    params = draw_affine(rng, config, image.shape)
    return warp_affine(image, mask, **params)


# --------------------------------------------------------------------------
# intensity transforms


def salt_pepper_sites(n_pixels, rng, fraction):
    """Flat pixel indices (without replacement) and a salt flag for each."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction {fraction} outside [0, 1]")
    n = int(math.floor(fraction * n_pixels + 0.5))
    sites = rng.choice(n_pixels, size=n, replace=False)
    salt = rng.random(n) < 0.5
    return sites, salt


def apply_salt_pepper(image: RasterImage, rng, fraction) -> RasterImage:
    """Set ``round(fraction * n_pixels)`` pixels to each band's min or max."""
    h, w = image.shape
    sites, salt = salt_pepper_sites(h * w, rng, fraction)
    if len(sites) == 0:
        return image
    valid = ~image.nodata_mask
    bands = {}
    for name, g in image.bands.items():
        if name in QA_BANDS or not valid.any():
            bands[name] = g
            continue
        lo, hi = g[valid].min(), g[valid].max()
        flat = g.ravel().copy()
        flat[sites] = np.where(salt, hi, lo)
        bands[name] = flat.reshape(h, w)
    return image.with_bands(bands)


def value_noise(shape, rng, octaves=4, base_cells=2):
    """Smooth multi-octave value noise rescaled to [0, 1]."""
    h, w = shape
    total = np.zeros((h, w))
    amp = 1.0
    for o in range(max(1, octaves)):
        cells = base_cells * 2 ** o
        lattice = rng.random((cells + 1, cells + 1))
        ys = np.linspace(0, cells, h, endpoint=False) if h > 1 else np.zeros(1)
        xs = np.linspace(0, cells, w, endpoint=False) if w > 1 else np.zeros(1)
        y0 = np.floor(ys).astype(int)
        x0 = np.floor(xs).astype(int)
        ty = ys - y0
        tx = xs - x0
        ty = ty * ty * (3 - 2 * ty)
        tx = tx * tx * (3 - 2 * tx)
        a = lattice[y0][:, x0]
        b = lattice[y0][:, x0 + 1]
        c = lattice[y0 + 1][:, x0]
        d = lattice[y0 + 1][:, x0 + 1]
        top = a + (b - a) * tx
        bot = c + (d - c) * tx
        total += amp * (top + (bot - top) * ty[:, None])
        amp *= 0.5
    lo, hi = total.min(), total.max()
    if hi - lo < 1e-12:
        return np.zeros((h, w))
    return (total - lo) / (hi - lo)


def blend_white(image: RasterImage, alpha, white_level=1.0) -> RasterImage:
    """``(1 - alpha) * pixel + alpha * white_level`` on every non-QA band."""
    alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), image.shape)
    bands = {}
    for name, g in image.bands.items():
        if name in QA_BANDS:
            bands[name] = g
        else:
            bands[name] = ((1.0 - alpha) * g + alpha * white_level).astype(np.float32)
    return image.with_bands(bands)


def apply_atmosphere(image: RasterImage, rng, config: AugmentConfig) -> RasterImage:
    """Randomly add clouds (patchy), haze (uniform) and fog (low frequency)."""
    alpha = np.zeros(image.shape)
    if rng.random() < config.cloud_prob:
        amax = rng.uniform(*config.cloud_alpha)
        field = value_noise(image.shape, rng, config.noise_octaves)
        # keep only the upper half of the noise so clouds stay patchy
        alpha = np.maximum(alpha, amax * np.clip(2 * field - 1, 0, 1))
    if rng.random() < config.haze_prob:
        alpha = np.maximum(alpha, rng.uniform(*config.haze_alpha))
    if rng.random() < config.fog_prob:
        lo, hi = config.fog_alpha
        field = value_noise(image.shape, rng, 1)
        alpha = np.maximum(alpha, lo + (hi - lo) * field)
    if not alpha.any():
        return image
    return blend_white(image, alpha, config.white_level)


# --------------------------------------------------------------------------
# cropping


def random_window(width, height, size, rng) -> CropWindow:
    if size > min(width, height):
        raise CropTooLarge(f"crop {size} larger than image {width}x{height}")
    x0 = int(rng.integers(width - size + 1))
    y0 = int(rng.integers(height - size + 1))
    return CropWindow(x0, y0, size)


def crop_train(image: RasterImage, mask: RegionMask, rng, config: AugmentConfig, window=None):
    """Random square crop that tries to keep part of the loss region.

    Draws up to ``1 + max_crop_retries`` windows. Returns
    ``(image, mask, usable)``; ``usable`` is False when every window missed
    the region, and the caller must then skip the example's loss.
    """
    size = config.crop_size
    attempts = 1 if window is not None else 1 + config.max_crop_retries
    for _ in range(attempts):
        win = window or random_window(image.width, image.height, size, rng)
        cm = crop_mask(mask, win)
        if cm.pixel_count > 0:
            return crop(image, win), cm, True
    return crop(image, win), cm, False


def augment_example(image, mask, rng, config: AugmentConfig):
    """Full training transform: affine, crop, then intensity noise."""
    image, mask = apply_affine(image, mask, rng, config)
    image, mask, usable = crop_train(image, mask, rng, config)
    if rng.random() < config.salt_pepper_prob:
        image = apply_salt_pepper(image, rng, config.salt_pepper_fraction)
    image = apply_atmosphere(image, rng, config)
    return image, mask, usable
