"""Slow, obviously-correct reference implementations shared by the tests."""
import math

import numpy as np

from forestdriver.raster import CENTER_EPS


def winding_number(px, py, ring):
    """Signed winding number of ``ring`` around (px, py)."""
    wn = 0
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        cross = (x1 - x0) * (py - y0) - (px - x0) * (y1 - y0)
        if y0 <= py < y1 and cross > 0:
            wn += 1
        elif y1 <= py < y0 and cross < 0:
            wn -= 1
    return wn


def oracle_mask(rings, width, height):
    """Pixel-center containment by winding number, combined across rings by parity."""
    out = np.zeros((height, width), dtype=bool)
    for r in range(height):
        for c in range(width):
            px, py = c + 0.5 + CENTER_EPS, r + 0.5 + CENTER_EPS
            count = sum(winding_number(px, py, ring) != 0 for ring in rings)
            out[r, c] = count % 2 == 1
    return out


def star_polygon(rng, cx, cy, rmin, rmax, n):
    """Simple polygon: vertices sorted by angle around (cx, cy)."""
    angles = np.sort(rng.uniform(0, 2 * np.pi, n))
    radii = rng.uniform(rmin, rmax, n)
    return [(float(cx + r * math.cos(a)), float(cy + r * math.sin(a))) for a, r in zip(angles, radii)]


def zonal_oracle(band, mask):
    vals = [float(band[r, c]) for r in range(band.shape[0]) for c in range(band.shape[1]) if mask[r, c]]
    mean = math.fsum(vals) / len(vals)
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / len(vals))
    return {"mean": mean, "std": std, "min": min(vals), "max": max(vals)}


def sort_oracle(stack, valid):
    """Median by explicit per-pixel sort; NaN where nothing is valid."""
    k, h, w = stack.shape
    out = np.full((h, w), np.nan)
    for r in range(h):
        for c in range(w):
            vals = sorted(float(stack[i, r, c]) for i in range(k) if valid[i, r, c])
            if not vals:
                continue
            m = len(vals)
            out[r, c] = vals[m // 2] if m % 2 else np.float32((vals[m // 2 - 1] + vals[m // 2]) * 0.5)
    return out
