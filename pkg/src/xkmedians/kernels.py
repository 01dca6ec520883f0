"""Kernel backend selection.

Prefers the compiled Cython extension; falls back to the NumPy
implementation when the extension was not built.  Set
``XKMEDIANS_PURE_PYTHON=1`` to force the fallback (used by the
benchmark to compare both).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("XKMEDIANS_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND

pow_dist_one = _impl.pow_dist_one
min_pow_dist = _impl.min_pow_dist
nearest_two = _impl.nearest_two
best_swap_batch = _impl.best_swap_batch
first_separating = _impl.first_separating
route_points = _impl.route_points
