# cython: language_level=3
"""Compiled inner loops: biquad cascade recursion and one-sided Jacobi sweeps.

Both routines mirror ``radiosv._fallback`` operation for operation.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def sosfilt(double[:, ::1] sos, double[::1] x):
    """Filter ``x`` through each section of ``sos`` in turn (DF-II transposed)."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t n_sec = sos.shape[0]
    cdef Py_ssize_t i, s
    cdef double b0, b1, b2, a1, a2, z1, z2, xn, yn
    out = np.array(x, dtype=np.float64, copy=True)
    cdef double[::1] y = out
    for s in range(n_sec):
        b0 = sos[s, 0]
        b1 = sos[s, 1]
        b2 = sos[s, 2]
        a1 = sos[s, 3]
        a2 = sos[s, 4]
        z1 = 0.0
        z2 = 0.0
        for i in range(n):
            xn = y[i]
            yn = b0 * xn + z1
            z1 = b1 * xn - a1 * yn + z2
            z2 = b2 * xn - a2 * yn
            y[i] = yn
    return out


def jacobi_sweeps(double[:, ::1] a_t, double tol, int max_sweeps):
    """Orthogonalize the rows of ``a_t`` (columns of A) in place.

    Returns ``(v_t, sweeps)`` where ``v_t`` holds the accumulated rotations
    row-wise, so that ``A_in @ v_t.T`` equals the rotated matrix.
    """
    cdef Py_ssize_t n = a_t.shape[0]
    cdef Py_ssize_t m = a_t.shape[1]
    cdef Py_ssize_t p, q, i
    cdef double alpha, beta, gamma, zeta, t, c, s, ap, aq
    cdef int sweep = 0
    cdef bint rotated = True
    v_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] v_t = v_arr

    while rotated and sweep < max_sweeps:
        rotated = False
        sweep += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for i in range(m):
                    ap = a_t[p, i]
                    aq = a_t[q, i]
                    alpha = alpha + ap * ap
                    beta = beta + aq * aq
                    gamma = gamma + ap * aq
                if gamma == 0.0 or fabs(gamma) <= tol * sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = c * t
                for i in range(m):
                    ap = a_t[p, i]
                    aq = a_t[q, i]
                    a_t[p, i] = c * ap - s * aq
                    a_t[q, i] = s * ap + c * aq
                for i in range(n):
                    ap = v_t[p, i]
                    aq = v_t[q, i]
                    v_t[p, i] = c * ap - s * aq
                    v_t[q, i] = s * ap + c * aq
    return v_arr, sweep
