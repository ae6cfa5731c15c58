"""Hot-loop kernels, compiled when available.

The Cython extension ``tchm._kernels`` is used if it was built; otherwise
the SciPy implementation in ``tchm._fallback`` is used.  Setting
``TCHM_PURE_PYTHON=1`` forces the fallback.
"""

import os

import numpy as np
import scipy.sparse as sp

from . import _fallback

BACKEND = "python"
_compiled = None
if os.environ.get("TCHM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
        BACKEND = "cython"
    except ImportError:  # extension not built
        _compiled = None


def available_backends():
    return ["python"] + (["cython"] if _compiled is not None else [])


def _impl(backend):
    backend = backend or BACKEND
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return _compiled
    if backend == "python":
        return _fallback
    raise ValueError(f"unknown backend {backend!r}")


def rk4_propagate(operator, b, weights, dt, n_steps, stride=1, backend=None):
    """Integrate ``dB/dt = operator @ B`` with fixed-step RK4, in place.

    ``b`` and ``weights`` are ``(n, ncol)`` complex arrays.  Returns the
    ``(n_steps // stride, ncol)`` samples of ``sum_i weights[i, c] b[i, c]``
    taken every ``stride`` steps; ``b`` holds the final state.
    """
    op = sp.csr_matrix(operator)
    op.sort_indices()
    indptr = np.ascontiguousarray(op.indptr, dtype=np.int32)
    indices = np.ascontiguousarray(op.indices, dtype=np.int32)
    data = np.ascontiguousarray(op.data, dtype=np.complex128)
    if b.dtype != np.complex128 or not b.flags.c_contiguous or b.ndim != 2:
        raise TypeError("b must be a C-contiguous 2-D complex128 array")
    w = np.ascontiguousarray(weights, dtype=np.complex128)
    if w.shape != b.shape:
        raise ValueError("weights must have the shape of b")
    return _impl(backend).rk4_propagate(indptr, indices, data, b, w, float(dt),
                                        int(n_steps), int(stride))
