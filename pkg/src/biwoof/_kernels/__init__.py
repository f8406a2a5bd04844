"""Kernel backend selection.

Two interchangeable backends provide the hot kernels (bilinear warp, 3x3
median, binary pattern codes, and the inner flow solver):

* ``native``  -- compiled extension, used by default when the build produced it
* ``numpy``   -- pure-numpy fallback, always available

Set the ``BIWOOF_BACKEND`` environment variable to ``native`` or ``numpy``
before import to force a choice; ``set_backend`` switches at runtime (used by
the benchmark and the parity tests).
"""

import os

from . import numpy_backend

try:
    from . import _native
    HAVE_NATIVE = True
except ImportError:
    _native = None
    HAVE_NATIVE = False

_BACKENDS = {"numpy": numpy_backend}
if HAVE_NATIVE:
    _BACKENDS["native"] = _native

_requested = os.environ.get("BIWOOF_BACKEND", "").strip().lower()
if _requested:
    if _requested not in _BACKENDS:
        raise ImportError(
            f"BIWOOF_BACKEND={_requested!r} is not available; "
            f"choices: {sorted(_BACKENDS)}")
    _active = _requested
else:
    _active = "native" if HAVE_NATIVE else "numpy"


def get_backend():
    """Name of the active backend, ``'native'`` or ``'numpy'``."""
    return _active


def available_backends():
    return sorted(_BACKENDS)


def set_backend(name):
    """Switch the active backend at runtime.  Returns the previous name."""
    global _active, warp_bilinear, median_3x3, lbp_codes, tvl1_inner
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choices: {sorted(_BACKENDS)}")
    previous = _active
    _active = name
    mod = _BACKENDS[name]
    warp_bilinear = mod.warp_bilinear
    median_3x3 = mod.median_3x3
    lbp_codes = mod.lbp_codes
    tvl1_inner = mod.tvl1_inner
    return previous


set_backend(_active)
