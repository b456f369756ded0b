"""Mesh kernels: compiled extension when built, numpy fallback otherwise.

Set ``SPECBOUND_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
if os.environ.get("SPECBOUND_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._ext import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    else:
        BACKEND = "cython"
else:
    _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py

triangle_areas = _impl.triangle_areas
cotan_assemble = _impl.cotan_assemble
