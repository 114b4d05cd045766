"""Kernel backend dispatch.

The numba backend is used when importable unless PTORSION_NUMBA is set to
0/false/off, in which case the pure numpy backend runs.  Both backends are
sequential and deterministic; PTORSION_THREADS caps the numba thread pool
for any library-internal parallelism.
"""

from __future__ import annotations

import importlib
import os

from . import numpy_backend


def _load_numba():
    # importlib, not "from . import": a module-level numba_backend = None
    # sentinel would make the fromlist machinery skip the submodule import
    try:
        return importlib.import_module(".numba_backend", __name__)
    except ImportError:
        return None


_flag = os.environ.get("PTORSION_NUMBA", "1").strip().lower()
_want_numba = _flag not in {"0", "false", "off", "no"}

numba_backend = _load_numba() if _want_numba else None

active = numba_backend if numba_backend is not None else numpy_backend


def backend_name() -> str:
    return active.NAME


def available_backends() -> list:
    out = [numpy_backend]
    nb = numba_backend if numba_backend is not None else _load_numba()
    if nb is not None:
        out.append(nb)
    return out
