"""Import-time backend selection.

Tries the compiled Cython kernels first and falls back to the pure-Python
twins.  ``STARWEYL_BACKEND=py`` forces the fallback (useful for the parity
tests and the benchmark).
"""

from __future__ import annotations

import os

if os.environ.get("STARWEYL_BACKEND", "").lower() in {"py", "python"}:
    from . import _core_py as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _core_py as _impl

BACKEND = _impl.BACKEND
star_dense = _impl.star_dense
gauss_eval = _impl.gauss_eval
