"""Raster primitives: container I/O, polygon masks, zonal statistics, crops.

Geometry is always in image pixel coordinates: x grows to the right along
columns, y grows down along rows, and pixel ``(row, col)`` covers
``[col, col + 1) x [row, row + 1)`` with its center at ``(col + 0.5, row + 0.5)``.
"""
from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    CropTooLarge,
    DegenerateGeometry,
    EmptyRegion,
    ShapeMismatch,
    ValidationError,
)

QA_BANDS = ("qa_cloud", "qa_cirrus")
VISIBLE_BANDS = ("red", "green", "blue")
KNOWN_BANDS = ("red", "green", "blue", "nir", "swir1", "swir2", "pan") + QA_BANDS
NODATA_SENTINEL = -9999.0
CENTER_EPS = 1e-9

M_PER_DEG_LAT = 110_574.0
M_PER_DEG_LON = 111_320.0


@dataclass(frozen=True)
class RasterImage:
    """Multi-band float32 grid with a shared per-pixel nodata mask.

    ``origin`` is the (lon, lat) of the center of pixel (0, 0). Scenes carry an
    ``acquisition_date``; composites carry a ``date_range`` instead.
    """

    bands: dict
    pixel_size: float = 15.0
    origin: tuple = (0.0, 0.0)
    acquisition_date: dt.date | None = None
    date_range: tuple | None = None
    nodata_mask: np.ndarray | None = None
    scene_id: str | None = None

    def __post_init__(self):
        if not self.bands:
            raise ValidationError("raster needs at least one band")
        if not self.pixel_size > 0:
            raise ValidationError("pixel_size must be positive")
        bands = {}
        shape = None
        for name, grid in self.bands.items():
            arr = np.asarray(grid, dtype=np.float32)
            if arr.ndim != 2:
                raise ShapeMismatch(f"band {name!r} is not 2-D")
            if shape is None:
                shape = arr.shape
            elif arr.shape != shape:
                raise ShapeMismatch(f"band {name!r} has shape {arr.shape}, expected {shape}")
            if name in QA_BANDS and not np.isin(arr, (0.0, 1.0)).all():
                raise ValidationError(f"QA band {name!r} must contain only 0/1")
            bands[name] = arr
        object.__setattr__(self, "bands", bands)
        if self.nodata_mask is None:
            mask = np.zeros(shape, dtype=bool)
        else:
            mask = np.asarray(self.nodata_mask, dtype=bool)
            if mask.shape != shape:
                raise ShapeMismatch("nodata mask does not match band shape")
        object.__setattr__(self, "nodata_mask", mask)

    @property
    def height(self) -> int:
        return next(iter(self.bands.values())).shape[0]

    @property
    def width(self) -> int:
        return next(iter(self.bands.values())).shape[1]

    @property
    def shape(self):
        return (self.height, self.width)

    @property
    def band_names(self):
        return tuple(self.bands)

    @property
    def is_composite(self) -> bool:
        return self.acquisition_date is None

    def band(self, name) -> np.ndarray:
        try:
            return self.bands[name]
        except KeyError:
            from .errors import MissingBand

            raise MissingBand(f"raster has no band {name!r}") from None

    def stack(self, names) -> np.ndarray:
        """(len(names), H, W) float32 array of the requested bands."""
        return np.stack([self.band(n) for n in names])

    def with_bands(self, bands, nodata_mask=None, **changes) -> "RasterImage":
        if nodata_mask is None:
            nodata_mask = self.nodata_mask
        return replace(self, bands=bands, nodata_mask=nodata_mask, **changes)


@dataclass(frozen=True)
class RegionMask:
    inside: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "inside", np.asarray(self.inside, dtype=bool))

    @property
    def height(self):
        return self.inside.shape[0]

    @property
    def width(self):
        return self.inside.shape[1]

    @property
    def pixel_count(self) -> int:
        return int(self.inside.sum())


@dataclass(frozen=True)
class CropWindow:
    x0: int
    y0: int
    size: int

    def slices(self):
        return (slice(self.y0, self.y0 + self.size), slice(self.x0, self.x0 + self.size))


# --------------------------------------------------------------------------
# polygons


def _ring_area(ring) -> float:
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _normalize_rings(polygon):
    """Accept one ring or a list of rings; drop explicit closing vertices."""
    rings = polygon
    if isinstance(polygon, np.ndarray) and polygon.ndim == 2:
        rings = [polygon]
    elif len(polygon) and np.isscalar(polygon[0][0]):
        rings = [polygon]
    out = []
    for ring in rings:
        r = np.asarray(ring, dtype=np.float64).reshape(-1, 2)
        if len(r) > 1 and np.array_equal(r[0], r[-1]):
            r = r[:-1]
        distinct = np.unique(r, axis=0)
        if len(distinct) < 3 or not np.all(np.isfinite(r)):
            raise DegenerateGeometry("polygon ring needs at least 3 distinct vertices")
        if _ring_area(r) == 0.0:
            raise DegenerateGeometry("polygon ring has zero area")
        out.append(r)
    if not out:
        raise DegenerateGeometry("polygon has no rings")
    return out


def polygon_edges(polygon) -> np.ndarray:
    """(m, 4) array of ``(x0, y0, x1, y1)`` segments over all rings."""
    segs = []
    for r in _normalize_rings(polygon):
        nxt = np.roll(r, -1, axis=0)
        segs.append(np.hstack([r, nxt]))
    return np.ascontiguousarray(np.vstack(segs))


def rasterize_polygon(polygon, width: int, height: int, allow_empty: bool = False) -> RegionMask:
    """Mask of pixels whose (slightly nudged) center lies inside ``polygon``.

    Containment uses the even-odd rule over all rings, so holes are
    additional rings. Centers are shifted by ``+1e-9`` on both axes to make
    boundary decisions deterministic.
    """
    edges = polygon_edges(polygon)
    inside = kernels.even_odd_fill(edges, int(width), int(height), CENTER_EPS).astype(bool)
    if not allow_empty and not inside.any():
        raise EmptyRegion("polygon covers no pixel centers")
    return RegionMask(inside)


# --------------------------------------------------------------------------
# statistics


def zonal_stats(band, mask, nodata=None) -> dict:
    """Mean, population std, min and max of ``band`` over the mask.

    ``nodata`` is an optional boolean grid of pixels to exclude. Accumulation
    is in float64.
    """
    band = np.asarray(band)
    inside = mask.inside if isinstance(mask, RegionMask) else np.asarray(mask, dtype=bool)
    if band.shape != inside.shape:
        raise ShapeMismatch(f"band shape {band.shape} != mask shape {inside.shape}")
    sel = inside
    if nodata is not None:
        sel = sel & ~np.asarray(nodata, dtype=bool)
    vals = band[sel].astype(np.float64)
    if vals.size == 0:
        raise EmptyRegion("no valid pixels inside the region")
    mean = vals.sum() / vals.size
    std = math.sqrt(((vals - mean) ** 2).sum() / vals.size)
    return {"mean": float(mean), "std": std, "min": float(vals.min()), "max": float(vals.max())}


def ndvi(nir, red):
    """Return ``(ndvi, nodata)``; pixels with NIR + Red == 0 are nodata."""
    nir = np.asarray(nir, dtype=np.float64)
    red = np.asarray(red, dtype=np.float64)
    if nir.shape != red.shape:
        raise ShapeMismatch(f"nir {nir.shape} vs red {red.shape}")
    denom = nir + red
    nodata = denom == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(nodata, 0.0, (nir - red) / np.where(nodata, 1.0, denom))
    return out.astype(np.float32), nodata


# --------------------------------------------------------------------------
# geometry transforms


def _shift_origin(image: RasterImage, dx_px, dy_px):
    lon, lat = image.origin
    dlat = -dy_px * image.pixel_size / M_PER_DEG_LAT
    coslat = max(math.cos(math.radians(lat)), 1e-12)
    dlon = dx_px * image.pixel_size / (M_PER_DEG_LON * coslat)
    return (lon + dlon, lat + dlat)


def crop(image: RasterImage, window: CropWindow) -> RasterImage:
    if (window.x0 < 0 or window.y0 < 0 or window.x0 + window.size > image.width
            or window.y0 + window.size > image.height):
        raise CropTooLarge(f"window {window} exceeds image {image.width}x{image.height}")
    sl = window.slices()
    bands = {k: v[sl].copy() for k, v in image.bands.items()}
    return image.with_bands(bands, nodata_mask=image.nodata_mask[sl].copy(),
                            origin=_shift_origin(image, window.x0, window.y0))


def center_window(width, height, size) -> CropWindow:
    if size <= 0:
        raise ValidationError("crop size must be positive")
    if size > min(width, height):
        raise CropTooLarge(f"crop {size} larger than image {width}x{height}")
    return CropWindow((width - size) // 2, (height - size) // 2, size)


def center_crop(image: RasterImage, size: int):
    window = center_window(image.width, image.height, size)
    return crop(image, window), window


def crop_mask(mask: RegionMask, window: CropWindow) -> RegionMask:
    return RegionMask(mask.inside[window.slices()].copy())


def embed(full: np.ndarray, part: np.ndarray, window: CropWindow) -> np.ndarray:
    """Write ``part`` back into a copy of ``full`` at ``window``."""
    out = np.array(full, copy=True)
    out[window.slices()] = part
    return out


def upsample_bilinear(grid, factor: int = 2) -> np.ndarray:
    """Bilinear upsampling with half-pixel aligned centers and edge clamping."""
    grid = np.asarray(grid, dtype=np.float64)
    h, w = grid.shape

    def coords(n):
        src = (np.arange(n * factor) + 0.5) / factor - 0.5
        src = np.clip(src, 0, n - 1)
        i0 = np.floor(src).astype(int)
        i1 = np.minimum(i0 + 1, n - 1)
        return i0, i1, src - i0

    r0, r1, fy = coords(h)
    c0, c1, fx = coords(w)
    top = grid[r0][:, c0] * (1 - fx) + grid[r0][:, c1] * fx
    bot = grid[r1][:, c0] * (1 - fx) + grid[r1][:, c1] * fx
    return top * (1 - fy)[:, None] + bot * fy[:, None]


def pan_sharpen(rgb, pan):
    """Brovey pan-sharpening of three coarse bands onto a 2x finer pan band.

    Each bilinearly upsampled color band is scaled by ``pan / mean(R, G, B)``;
    pixels where the mean is zero pass through unscaled.
    """
    rgb = [np.asarray(b, dtype=np.float64) for b in rgb]
    pan = np.asarray(pan, dtype=np.float64)
    if len(rgb) != 3:
        raise ShapeMismatch("pan_sharpen needs exactly three color bands")
    h, w = rgb[0].shape
    if any(b.shape != (h, w) for b in rgb) or pan.shape != (2 * h, 2 * w):
        raise ShapeMismatch(f"pan must be exactly 2x the color bands, got {pan.shape} vs {(h, w)}")
    up = [upsample_bilinear(b, 2) for b in rgb]
    mean = (up[0] + up[1] + up[2]) / 3.0
    zero = mean == 0
    ratio = np.where(zero, 1.0, pan / np.where(zero, 1.0, mean))
    return tuple((u * ratio).astype(np.float32) for u in up)


def resample_to(grid, height, width) -> np.ndarray:
    """Bring a coarse band to ``(height, width)`` by integer bilinear upsampling."""
    grid = np.asarray(grid)
    if grid.shape == (height, width):
        return grid.astype(np.float32)
    fy, ry = divmod(height, grid.shape[0])
    fx, rx = divmod(width, grid.shape[1])
    if ry or rx or fy != fx:
        raise ShapeMismatch(f"cannot resample {grid.shape} to {(height, width)}")
    return upsample_bilinear(grid, fy).astype(np.float32)


# --------------------------------------------------------------------------
# container I/O


def write_raster(image: RasterImage, directory, nodata=NODATA_SENTINEL) -> Path:
    """Write ``meta.json`` plus one little-endian ``<band>.f32`` file per band."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "width": image.width,
        "height": image.height,
        "pixel_size_m": image.pixel_size,
        "origin_lon": image.origin[0],
        "origin_lat": image.origin[1],
        "bands": list(image.band_names),
        "nodata": nodata,
    }
    if image.acquisition_date is not None:
        meta["acquisition_date"] = image.acquisition_date.isoformat()
    if image.date_range is not None:
        meta["date_range"] = [d.isoformat() for d in image.date_range]
    if image.scene_id is not None:
        meta["scene_id"] = image.scene_id
    for name, grid in image.bands.items():
        arr = np.array(grid, dtype="<f4")
        if name not in QA_BANDS:
            arr[image.nodata_mask] = nodata
        arr.tofile(directory / f"{name}.f32")
    (directory / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
    return directory


def read_raster(directory, bands=None) -> RasterImage:
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text(encoding="utf-8"))
    w, h = int(meta["width"]), int(meta["height"])
    names = meta["bands"] if bands is None else [b for b in meta["bands"] if b in bands]
    nodata_value = meta.get("nodata", NODATA_SENTINEL)
    grids = {}
    nodata = np.zeros((h, w), dtype=bool)
    for name in names:
        arr = np.fromfile(directory / f"{name}.f32", dtype="<f4")
        if arr.size != w * h:
            raise ShapeMismatch(f"{name}.f32 holds {arr.size} values, expected {w * h}")
        arr = arr.reshape(h, w).astype(np.float32)
        if name not in QA_BANDS and nodata_value is not None:
            nodata |= arr == np.float32(nodata_value)
        grids[name] = arr
    acq = meta.get("acquisition_date")
    rng = meta.get("date_range")
    return RasterImage(
        bands=grids,
        pixel_size=float(meta["pixel_size_m"]),
        origin=(float(meta["origin_lon"]), float(meta["origin_lat"])),
        acquisition_date=dt.date.fromisoformat(acq) if acq else None,
        date_range=tuple(dt.date.fromisoformat(d) for d in rng) if rng else None,
        nodata_mask=nodata,
        scene_id=meta.get("scene_id"),
    )
