"""Backend selection for the stepping kernels.

The compiled extension is preferred; when it cannot be imported the
pure-Python implementation is used instead. ``use_backend`` switches
explicitly (tests and the benchmark use it to compare both); the
environment variable ``DYADICLAB_BACKEND=python`` forces the fallback at
import.
"""
import logging
import os

from . import _pykernels

logger = logging.getLogger(__name__)

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_active = _compiled if _compiled is not None else _pykernels
if os.environ.get("DYADICLAB_BACKEND") == "python":
    _active = _pykernels

DONE = _pykernels.DONE
CHUNK = _pykernels.CHUNK
UNDERFLOW = _pykernels.UNDERFLOW
STIFF = _pykernels.STIFF
ETD45 = _pykernels.ETD45
RODAS4 = _pykernels.RODAS4


def available_backends():
    return ["cython", "python"] if _compiled is not None else ["python"]


def backend_name():
    return _active.BACKEND


def use_backend(name):
    """Select ``"cython"`` or ``"python"``; returns the previous backend name."""
    global _active
    previous = _active.BACKEND
    if name == "python":
        _active = _pykernels
    elif name == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        _active = _compiled
    else:
        raise ValueError(f"unknown backend {name!r}")
    return previous


def rhs(y, a, b, d, mirror):
    return _active.rhs(y, a, b, d, mirror)


def advance(*args, **kwargs):
    return _active.advance(*args, **kwargs)
