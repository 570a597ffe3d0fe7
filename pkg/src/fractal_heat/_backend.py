"""Select the kernel implementation at import time.

The compiled extension is used when it was built; ``FRACTAL_HEAT_BACKEND``
set to ``python`` or ``cython`` forces a choice.
"""
import importlib
import os

from . import _kernels_py

_MODULES = {"python": "fractal_heat._kernels_py", "cython": "fractal_heat._kernels"}


def load(name):
    if name not in _MODULES:
        raise ValueError(f"unknown backend {name!r}; expected one of {sorted(_MODULES)}")
    return importlib.import_module(_MODULES[name])


def available():
    names = ["python"]
    try:
        load("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


def _select():
    wanted = os.environ.get("FRACTAL_HEAT_BACKEND", "").strip().lower()
    if wanted:
        return load(wanted)
    try:
        return load("cython")
    except ImportError:
        return _kernels_py


kernels = _select()
