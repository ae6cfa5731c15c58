"""Pure-Python/SciPy twin of the compiled kernels in ``_kernels.pyx``."""

import numpy as np
import scipy.sparse as sp


def rk4_propagate(indptr, indices, data, b, weights, dt, n_steps, stride):
    n = b.shape[0]
    op = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    n_out = n_steps // stride
    out = np.zeros((n_out, b.shape[1]), dtype=np.complex128)
    y = b.copy()
    s = 0
    for step in range(n_steps):
        k1 = op @ y
        k2 = op @ (y + 0.5 * dt * k1)
        k3 = op @ (y + 0.5 * dt * k2)
        k4 = op @ (y + dt * k3)
        y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (step + 1) % stride == 0 and s < n_out:
            out[s] = np.sum(weights * y, axis=0)
            s += 1
    b[...] = y
    return out
