# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 propagation of ``dB/dt = L B`` with a CSR superoperator.

Complex arithmetic is spelled out on interleaved (re, im) doubles; C99
complex multiplication carries NaN-handling overhead in the inner loop.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef void _stage(const int* indptr, const int* indices, const double* data,
                 const double* x, const double* y, double* acc, double* nxt,
                 double* row, Py_ssize_t nrow, Py_ssize_t ncol, double ca, double cy,
                 int mode) noexcept nogil:
    # one RK4 stage fused row by row: k_i = (L x)_i, then
    # mode 0: acc_i = k_i, nxt_i = y_i + cy k_i
    # mode 1: acc_i += ca k_i, nxt_i = y_i + cy k_i
    # mode 2: nxt_i += cy (acc_i + k_i)   (nxt is y, final update)
    cdef Py_ssize_t i, jj, c, xb, rb, start, stop, w2 = 2 * ncol
    cdef double vr, vi, xr, xi, kr, ki
    for i in range(nrow):
        start = indptr[i]
        stop = indptr[i + 1]
        rb = w2 * i
        if ncol == 1:
            # scalar accumulators stay in registers
            kr = 0.0
            ki = 0.0
            for jj in range(start, stop):
                vr = data[2 * jj]
                vi = data[2 * jj + 1]
                xb = 2 * indices[jj]
                kr += vr * x[xb] - vi * x[xb + 1]
                ki += vr * x[xb + 1] + vi * x[xb]
            row[0] = kr
            row[1] = ki
        else:
            for c in range(w2):
                row[c] = 0.0
        for jj in range(start, stop if ncol > 1 else start):
            vr = data[2 * jj]
            vi = data[2 * jj + 1]
            xb = w2 * indices[jj]
            for c in range(ncol):
                xr = x[xb + 2 * c]
                xi = x[xb + 2 * c + 1]
                row[2 * c] += vr * xr - vi * xi
                row[2 * c + 1] += vr * xi + vi * xr
        for c in range(w2):
            kr = row[c]
            if mode == 0:
                acc[rb + c] = kr
                nxt[rb + c] = y[rb + c] + cy * kr
            elif mode == 1:
                acc[rb + c] += ca * kr
                nxt[rb + c] = y[rb + c] + cy * kr
            else:
                nxt[rb + c] += cy * (acc[rb + c] + kr)


def rk4_propagate(const int[::1] indptr, const int[::1] indices, cnp.ndarray data,
                  cnp.ndarray b, cnp.ndarray weights, double dt,
                  Py_ssize_t n_steps, Py_ssize_t stride):
    """Advance ``b`` in place by ``n_steps`` RK4 steps.

    Returns ``(n_steps // stride, ncol)`` samples of ``sum_i weights[i, c] * b[i, c]``
    taken after every ``stride`` steps.
    """
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t ncol = b.shape[1]
    cdef Py_ssize_t n_out = n_steps // stride
    out_arr = np.zeros((n_out, ncol), dtype=np.complex128)
    row_arr = np.empty(ncol, dtype=np.complex128)
    tmp_arr = np.empty((n, ncol), dtype=np.complex128)
    tmp2_arr = np.empty((n, ncol), dtype=np.complex128)
    acc_arr = np.empty((n, ncol), dtype=np.complex128)
    cdef double[::1] dv = data.view(np.float64)
    cdef double[::1] bv = b.reshape(-1).view(np.float64)
    cdef double[::1] wv = np.ascontiguousarray(weights).reshape(-1).view(np.float64)
    cdef double[::1] ov = out_arr.reshape(-1).view(np.float64)
    cdef double[::1] rv = row_arr.view(np.float64)
    cdef double[::1] uv = tmp2_arr.reshape(-1).view(np.float64)
    cdef double[::1] tv = tmp_arr.reshape(-1).view(np.float64)
    cdef double[::1] av = acc_arr.reshape(-1).view(np.float64)
    cdef const int* ip = &indptr[0]
    cdef const int* ix = &indices[0]
    cdef double* d = &dv[0]
    cdef double* y = &bv[0]
    cdef double* w = &wv[0]
    cdef double* o = &ov[0]
    cdef double* r = &rv[0]
    cdef double* u = &uv[0]
    cdef double* t = &tv[0]
    cdef double* a = &av[0]
    cdef double h2 = 0.5 * dt
    cdef double h6 = dt / 6.0
    cdef Py_ssize_t step, i, c, s = 0
    cdef double sr, si
    with nogil:
        for step in range(n_steps):
            _stage(ip, ix, d, y, y, a, t, r, n, ncol, 0.0, h2, 0)
            _stage(ip, ix, d, t, y, a, u, r, n, ncol, 2.0, h2, 1)
            _stage(ip, ix, d, u, y, a, t, r, n, ncol, 2.0, dt, 1)
            _stage(ip, ix, d, t, y, a, y, r, n, ncol, 0.0, h6, 2)
            if (step + 1) % stride == 0 and s < n_out:
                for c in range(ncol):
                    sr = 0.0
                    si = 0.0
                    for i in range(n):
                        sr += w[2 * (i * ncol + c)] * y[2 * (i * ncol + c)] \
                            - w[2 * (i * ncol + c) + 1] * y[2 * (i * ncol + c) + 1]
                        si += w[2 * (i * ncol + c)] * y[2 * (i * ncol + c) + 1] \
                            + w[2 * (i * ncol + c) + 1] * y[2 * (i * ncol + c)]
                    o[2 * (s * ncol + c)] = sr
                    o[2 * (s * ncol + c) + 1] = si
                s += 1
    return out_arr
