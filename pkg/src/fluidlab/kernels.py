"""Backend selection for the hot stencil kernels.

The compiled extension (``fluidlab._cykernels``) is preferred when present;
otherwise the vectorized numpy fallback is used. ``FLUIDLAB_KERNELS`` forces
the choice: ``cython``, ``numpy``, or ``auto`` (default). Both backends share
contracts and agree to ~1e-15 (forward stencils bitwise, adjoints differ only
in summation order).

``BACKEND`` names the active implementation.
"""

from __future__ import annotations

import os

from fluidlab import _pykernels

_requested = os.environ.get("FLUIDLAB_KERNELS", "auto").strip().lower() or "auto"
if _requested not in ("auto", "cython", "numpy"):
    raise RuntimeError(
        "FLUIDLAB_KERNELS must be one of auto/cython/numpy, got %r" % (_requested,)
    )

if _requested in ("auto", "cython"):
    try:
        from fluidlab import _cykernels as _impl

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise RuntimeError(
                "FLUIDLAB_KERNELS=cython but the compiled extension is not built"
            )
        _impl = _pykernels
        BACKEND = "numpy"
else:
    _impl = _pykernels
    BACKEND = "numpy"

laplacian = _impl.laplacian
laplacian_adjoint = _impl.laplacian_adjoint
box_smooth3 = _impl.box_smooth3

__all__ = ["BACKEND", "laplacian", "laplacian_adjoint", "box_smooth3"]
