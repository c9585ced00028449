"""Backend selection for the distance/vote kernels.

The compiled extension is used when importable; set ``KNNGA_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _kernels_py

if os.environ.get("KNNGA_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.BACKEND
sq_distances = _impl.sq_distances
knn_vote = _impl.knn_vote


def available_backends():
    """Map backend name -> kernel module for every importable backend."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
