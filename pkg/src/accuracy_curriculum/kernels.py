"""Backend selection for the hot loops.

The compiled ``_ckernels`` extension is used when it has been built; otherwise
the numpy versions in ``_pykernels`` are used. Setting the environment variable
``ACCURACY_CURRICULUM_PURE=1`` forces the numpy backend.

All kernels operate in place. ``adam_update`` and ``polyak_update`` take
C-contiguous 1-D arrays (flattened parameter views); ``arm_step`` takes
``(n, 2)`` float64 arrays.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("ACCURACY_CURRICULUM_PURE") != "1":
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        _impl = _ckernels
        BACKEND = "cython"

adam_update = _impl.adam_update
polyak_update = _impl.polyak_update
arm_step = _impl.arm_step


def get_backend(name):
    """Return the kernel module called ``name`` ("cython" or "python")."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")
