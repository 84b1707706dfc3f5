"""Kernel backend selection.

The compiled extension ``evosurf._kernels`` is used when importable;
set ``EVOSURF_PURE_PYTHON=1`` to force the numpy implementation.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("EVOSURF_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def backends():
    """Available implementations by name."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels as _compiled

        out["cython"] = _compiled
    except ImportError:
        pass
    return out


def ns_element_matrices(phi, G, psi, nu, P, w, dA, tau, visc, pen, backend=None):
    impl = _impl if backend is None else backends()[backend]
    c = np.ascontiguousarray
    return impl.ns_element_matrices(
        c(phi, dtype=float), c(G, dtype=float), c(psi, dtype=float), c(nu, dtype=float),
        c(P, dtype=float), c(w, dtype=float), c(dA, dtype=float),
        float(tau), float(visc), float(pen),
    )
