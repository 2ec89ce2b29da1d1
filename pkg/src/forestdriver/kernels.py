"""Kernel backend selection.

The compiled ``_ext`` module is used when it imports; otherwise the numpy
implementations in ``_pure`` are used. Set ``FORESTDRIVER_PURE=1`` to force
the pure backend. Both expose ``masked_median``, ``even_odd_fill`` and
``gini_best_split`` with identical results.
"""
import os

from . import _pure as pure

try:
    from . import _ext as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and not os.environ.get("FORESTDRIVER_PURE"):
    backend = compiled
    BACKEND = "compiled"
else:
    backend = pure
    BACKEND = "pure"

masked_median = backend.masked_median
even_odd_fill = backend.even_odd_fill
gini_best_split = backend.gini_best_split


def available_backends():
    """Mapping of backend name to module for every importable backend."""
    out = {"pure": pure}
    if compiled is not None:
        out["compiled"] = compiled
    return out
