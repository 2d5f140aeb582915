"""Kernel dispatch: compiled extension when importable, numpy otherwise.

Set ``FEDIMB_PURE_PYTHON=1`` to force the numpy path.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("FEDIMB_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass

window_deltas = _impl.window_deltas
selection_hits = _impl.selection_hits
