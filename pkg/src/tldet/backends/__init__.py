"""Kernel backend selection.

The hot kernels (7x7 attention convolution, channel/global pooling,
pairwise IoU matrices) exist twice: a Cython extension (`_core`) and a
pure-numpy fallback (`numpy_ops`).  The compiled backend is picked at
import time when available; set ``TLDET_BACKEND=numpy`` or
``TLDET_BACKEND=compiled`` to force one (forcing an unavailable backend
raises).  ``tldet bench --backend both`` times one against the other.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

from tldet.errors import ValidationError

from . import numpy_ops

BACKEND_ENV = "TLDET_BACKEND"

try:
    from . import _core as _compiled
except ImportError:
    _compiled = None


def available_backends() -> tuple[str, ...]:
    return ("compiled", "numpy") if _compiled is not None else ("numpy",)


def get_ops(name: str = "auto"):
    """Return the kernel module for `name` ('auto', 'compiled' or 'numpy')."""
    if name == "auto":
        return _compiled if _compiled is not None else numpy_ops
    if name == "numpy":
        return numpy_ops
    if name == "compiled":
        if _compiled is None:
            raise ValidationError("compiled backend requested but not built")
        return _compiled
    raise ValidationError(f"unknown backend {name!r}")


ops = get_ops(os.environ.get(BACKEND_ENV, "auto"))
ACTIVE_BACKEND: str = ops.NAME


@contextmanager
def use_backend(name: str):
    """Temporarily swap the active kernel backend (single-threaded use)."""
    global ops, ACTIVE_BACKEND
    prev = ops
    ops = get_ops(name)
    ACTIVE_BACKEND = ops.NAME
    try:
        yield ops
    finally:
        ops = prev
        ACTIVE_BACKEND = prev.NAME
