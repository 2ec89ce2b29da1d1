import datetime as dt

import numpy as np
import pytest

from forestdriver import kernels
from forestdriver.raster import RasterImage

KERNEL_NAMES = ("masked_median", "even_odd_fill", "gini_best_split")


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request, monkeypatch):
    """Run the test once per importable kernel backend."""
    mod = kernels.available_backends()[request.param]
    for name in KERNEL_NAMES:
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return request.param


def make_scene(values, date=dt.date(2015, 6, 1), cloud=None, cirrus=None, nodata=None,
               scene_id=None, bands=("red",)):
    """Scene with every listed band set to ``values`` plus QA bands."""
    values = np.asarray(values, dtype=np.float32)
    shape = values.shape
    b = {name: values.copy() for name in bands}
    b["qa_cloud"] = np.zeros(shape, np.float32) if cloud is None else np.asarray(cloud, np.float32)
    b["qa_cirrus"] = np.zeros(shape, np.float32) if cirrus is None else np.asarray(cirrus, np.float32)
    return RasterImage(bands=b, acquisition_date=date, nodata_mask=nodata,
                       scene_id=scene_id or f"scene_{date.isoformat()}")


@pytest.fixture(scope="session")
def textured_dataset(tmp_path_factory):
    """The 32/8/8 synthetic textured event set with built scene sets."""
    from forestdriver import pipeline
    from forestdriver.ingest import load_manifest
    from forestdriver.synthetic import make_textured_dataset

    root = tmp_path_factory.mktemp("textured")
    manifest = make_textured_dataset(root, seed=0)
    events = load_manifest(manifest)
    sets = pipeline.build_scene_sets(events)
    return manifest, events, sets


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, elapsed, detail in mod.RESULTS:
        line = f"{'PASS' if ok else 'FAIL'}  {name:<30} {elapsed:8.2f}s"
        terminalreporter.write_line(line + (f"  {detail}" if detail else ""))
    for key, value in getattr(mod, "RESULTS_NOTE", {}).items():
        terminalreporter.write_line(f"      {key}: {value:.4f}")
