"""Pure numpy implementations of the hot kernels.

These are the reference behaviour for ``_ext.pyx``; both must return
bit-identical results, so the floating point expressions below are written
in exactly the order the compiled versions use.
"""
import numpy as np


def masked_median(values, valid):
    """Per-column median of ``values`` over rows where ``valid`` is set.

    Parameters
    ----------
    values : float32 array (k, n)
    valid : uint8 array (k, n)

    Returns
    -------
    median : float32 array (n,)
        Even counts give the mean of the two middle values, evaluated in
        float64 and rounded once to float32. Columns without valid rows are 0.
    ok : uint8 array (n,)
        1 where at least one row was valid.
    """
    values = np.asarray(values, dtype=np.float32)
    valid = np.asarray(valid).astype(bool)
    k, n = values.shape
    work = np.where(valid, values, np.float32(np.inf))
    work.sort(axis=0)
    count = valid.sum(axis=0)
    ok = count > 0
    lo = np.clip((count - 1) // 2, 0, k - 1)
    hi = np.clip(count // 2, 0, k - 1)
    cols = np.arange(n)
    a = work[lo, cols].astype(np.float64)
    b = work[hi, cols].astype(np.float64)
    med = ((a + b) * 0.5).astype(np.float32)
    med[~ok] = 0.0
    return med, ok.astype(np.uint8)


def even_odd_fill(edges, width, height, eps):
    """Rasterize edges with the even-odd rule at nudged pixel centers.

    ``edges`` is a float64 array (m, 4) of ``(x0, y0, x1, y1)`` segments.
    Pixel ``(row, col)`` is tested at ``(col + 0.5 + eps, row + 0.5 + eps)``.
    """
    edges = np.asarray(edges, dtype=np.float64).reshape(-1, 4)
    out = np.zeros((height, width), dtype=np.uint8)
    if len(edges) == 0 or width == 0 or height == 0:
        return out
    py = np.arange(height, dtype=np.float64) + 0.5 + eps
    px = np.arange(width, dtype=np.float64) + 0.5 + eps
    parity = np.zeros((height, width), dtype=bool)
    # chunk over edges to bound the (edges, rows, cols) temporary
    chunk = max(1, 4_000_000 // max(1, height * width))
    for start in range(0, len(edges), chunk):
        e = edges[start:start + chunk]
        x0 = e[:, 0:1]
        y0 = e[:, 1:2]
        x1 = e[:, 2:3]
        y1 = e[:, 3:4]
        crosses = (y0 > py) != (y1 > py)  # (m, h)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = (x1 - x0) * (py - y0) / (y1 - y0) + x0
        hit = crosses[:, :, None] & (px[None, None, :] < xi[:, :, None])
        parity ^= (np.add.reduce(hit, axis=0, dtype=np.int64) & 1).astype(bool)
    out[parity] = 1
    return out


def gini_best_split(X, y, features, n_classes, min_leaf):
    """Best Gini split of a node over the candidate ``features``.

    The split score is ``sum_k nL_k^2 / nL + sum_k nR_k^2 / nR``; maximizing
    it minimizes the weighted Gini impurity of the children. Ties keep the
    first candidate in (feature order, ascending threshold) order.

    Returns ``(feature, threshold, score)``; ``feature`` is -1 when no split
    satisfies ``min_leaf``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = len(y)
    best_f, best_t, best_s = -1, 0.0, -np.inf
    if n < 2 * min_leaf:
        return best_f, best_t, best_s
    total = np.bincount(y, minlength=n_classes).astype(np.int64)
    n_left = np.arange(1, n, dtype=np.int64)
    n_right = n - n_left
    size_ok = (n_left >= min_leaf) & (n_right >= min_leaf)
    eye = np.eye(n_classes, dtype=np.int64)
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        left = np.cumsum(eye[y[order]], axis=0)[:-1]
        right = total[None, :] - left
        ok = size_ok & (xs[:-1] < xs[1:])
        if not ok.any():
            continue
        sq_l = (left * left).sum(axis=1)
        sq_r = (right * right).sum(axis=1)
        score = sq_l.astype(np.float64) / n_left.astype(np.float64) + sq_r.astype(
            np.float64
        ) / n_right.astype(np.float64)
        score[~ok] = -np.inf
        i = int(np.argmax(score))
        if score[i] > best_s:
            best_s = float(score[i])
            best_f = int(f)
            lo = xs[i]
            hi = xs[i + 1]
            t = (lo + hi) * 0.5
            if t >= hi:
                t = lo
            best_t = float(t)
    return best_f, best_t, best_s
