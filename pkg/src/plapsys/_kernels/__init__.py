"""Element kernel backend selection.

The compiled Cython core is preferred when the extension built; otherwise
the NumPy fallback is used.  Set PLAPSYS_PURE_PY=1 to force the fallback
(used by the benchmark and the backend equivalence tests).
"""

import os

from . import numpy_backend

if os.environ.get("PLAPSYS_PURE_PY", "0") not in ("", "0"):
    _impl = numpy_backend
    BACKEND = "numpy"
else:
    try:
        from . import _speedups as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = numpy_backend
        BACKEND = "numpy"

element_gradients = _impl.element_gradients
diffusivity_weights = _impl.diffusivity_weights
scale_local_matrices = _impl.scale_local_matrices
plap_apply = _impl.plap_apply
node_max_over_elements = _impl.node_max_over_elements


def backend_name():
    """Name of the kernel backend selected at import: 'compiled' or 'numpy'."""
    return BACKEND
