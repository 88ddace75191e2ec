"""Hot kernels with a compiled implementation and a numpy fallback.

The compiled module is used when it imports; setting ``ABPVERIFY_PURE=1``
forces the fallback.  ``BACKEND`` names the active implementation.
"""

import os

from . import _kernels_py

if os.environ.get("ABPVERIFY_PURE", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

contact_argmin = _impl.contact_argmin
jacobi_rk4 = _impl.jacobi_rk4

__all__ = ["BACKEND", "contact_argmin", "jacobi_rk4"]
