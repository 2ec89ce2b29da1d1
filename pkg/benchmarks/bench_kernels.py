"""Compare the compiled and pure kernel backends on representative inputs.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Reports the best-of-N wall time per kernel and backend, the speedup, and
whether both backends returned identical results.
"""
import argparse
import json
import sys
import time

import numpy as np

from forestdriver import kernels
from forestdriver.raster import polygon_edges


def median_case(rng):
    k, h, w = 9, 332, 332
    values = rng.random((k, h * w), dtype=np.float32)
    valid = (rng.random((k, h * w)) > 0.3).astype(np.uint8)
    return (values, valid)


def fill_case(rng):
    t = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    r = 120 + 30 * np.sin(5 * t)
    ring = list(zip(166 + r * np.cos(t), 166 + r * np.sin(t)))
    return (polygon_edges([ring]), 332, 332, 1e-9)


def split_case(rng):
    n, d = 2000, 20
    X = rng.normal(size=(n, d))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(np.int64) + 2 * (X[:, 2] > 0.5)
    return (X, y, np.arange(d, dtype=np.int64), 4, 1)


CASES = {
    "masked_median": median_case,
    "even_odd_fill": fill_case,
    "gini_best_split": split_case,
}


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def bench(fn, args, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(repeat=5, seed=0):
    backends = kernels.available_backends()
    rows = []
    for name, make in CASES.items():
        args = make(np.random.default_rng(seed))
        times, outs = {}, {}
        for bname, mod in backends.items():
            times[bname], outs[bname] = bench(getattr(mod, name), args, repeat)
        row = {"kernel": name, **{f"{b}_s": t for b, t in times.items()}}
        if "compiled" in times:
            row["speedup"] = times["pure"] / times["compiled"]
            row["identical"] = bool(_same(outs["pure"], outs["compiled"]))
        rows.append(row)
    return rows


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--json", default=None)
    args = p.parse_args(argv)
    if kernels.compiled is None:
        print("compiled backend not built; timing the pure backend only", file=sys.stderr)
    rows = run(args.repeat)
    for r in rows:
        line = f"{r['kernel']:<16} pure {r['pure_s'] * 1e3:9.2f} ms"
        if "compiled_s" in r:
            line += (f"  compiled {r['compiled_s'] * 1e3:9.2f} ms  speedup {r['speedup']:6.1f}x"
                     f"  identical={r['identical']}")
        print(line)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
