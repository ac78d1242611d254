# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled accelerated projected gradient for disk-constrained least squares.

Same iteration as ``_apg_py.apg``. Matrix-vector products go through BLAS
``zgemv``; everything else stays in C, so a whole solve runs without the
interpreter.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt
from scipy.linalg.cython_blas cimport zgemv, zcopy

cnp.import_array()

ctypedef double complex cplx


cdef inline double cmod(cplx z) nogil:
    return sqrt(z.real * z.real + z.imag * z.imag)


cdef inline cplx proj(cplx z) nogil:
    cdef double a = cmod(z)
    if a > 1.0:
        return z / a
    return z


cdef void residual_grad(cplx *K, cplx *KH, cplx *d, cplx *x, cplx *r, cplx *g,
                        int m, int n) nogil:
    # r = K x + d ; g = K^H r.  Row-major K (m x n) is column-major K^T.
    cdef char tr = b'T'
    cdef int one = 1
    cdef cplx alpha = 1.0, beta_one = 1.0, beta_zero = 0.0
    zcopy(&m, d, &one, r, &one)
    zgemv(&tr, &n, &m, &alpha, K, &n, x, &one, &beta_one, r, &one)
    zgemv(&tr, &m, &n, &alpha, KH, &m, r, &one, &beta_zero, g, &one)


def apg(K, d, x0, double inv_lip, double tol, Py_ssize_t max_iter):
    """Minimize ``||K x + d||^2`` subject to ``|x_l| <= 1``.

    Returns ``(x, iterations, converged)``.
    """
    cdef cnp.ndarray[cplx, ndim=2, mode="c"] Ka = np.ascontiguousarray(K, dtype=np.complex128)
    cdef cnp.ndarray[cplx, ndim=2, mode="c"] KHa = np.ascontiguousarray(Ka.conj().T)
    cdef cnp.ndarray[cplx, ndim=1, mode="c"] da = np.ascontiguousarray(d, dtype=np.complex128)
    cdef int m = Ka.shape[0], n = Ka.shape[1]
    x_arr = np.array(x0, dtype=np.complex128)
    cdef cplx[::1] x = x_arr
    cdef cplx[::1] y = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] xn = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] r = np.empty(max(m, 1), dtype=np.complex128)
    cdef cplx[::1] g = np.empty(n, dtype=np.complex128)
    cdef cplx *Kp = &Ka[0, 0]
    cdef cplx *KHp = &KHa[0, 0]
    cdef cplx *dp = &da[0]
    cdef double t = 1.0, tn, lip = 1.0 / inv_lip, smax, kmax, dot, a
    cdef cplx s, p
    cdef Py_ssize_t j, it = 0
    cdef bint done = False

    with nogil:
        for j in range(n):
            x[j] = proj(x[j])
            y[j] = x[j]
        while it < max_iter:
            it += 1
            residual_grad(Kp, KHp, dp, &y[0], &r[0], &g[0], m, n)
            smax = 0.0
            dot = 0.0
            for j in range(n):
                xn[j] = proj(y[j] - inv_lip * g[j])
                s = y[j] - xn[j]
                a = cmod(s)
                if a > smax:
                    smax = a
                p = xn[j] - x[j]
                dot += s.real * p.real + s.imag * p.imag
            if lip * smax <= tol:
                residual_grad(Kp, KHp, dp, &xn[0], &r[0], &g[0], m, n)
                kmax = 0.0
                for j in range(n):
                    a = cmod(xn[j] - proj(xn[j] - g[j]))
                    if a > kmax:
                        kmax = a
                if kmax <= tol:
                    for j in range(n):
                        x[j] = xn[j]
                    done = True
                    break
            if dot > 0.0:
                t = 1.0
                for j in range(n):
                    y[j] = xn[j]
            else:
                tn = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
                for j in range(n):
                    y[j] = xn[j] + ((t - 1.0) / tn) * (xn[j] - x[j])
                t = tn
            for j in range(n):
                x[j] = xn[j]
    return x_arr, it, bool(done)
