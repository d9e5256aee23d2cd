"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``.

``sosfilt`` orders its arithmetic exactly like the compiled code, so the two
backends agree bit for bit.  ``jacobi_sweeps`` uses BLAS dot products and
agrees with the compiled sweep to rounding.
"""

import math

import numpy as np


def sosfilt(sos, x):
    y = [float(v) for v in x]
    for b0, b1, b2, a1, a2 in np.asarray(sos, dtype=np.float64).tolist():
        z1 = 0.0
        z2 = 0.0
        for i, xn in enumerate(y):
            yn = b0 * xn + z1
            z1 = b1 * xn - a1 * yn + z2
            z2 = b2 * xn - a2 * yn
            y[i] = yn
    return np.array(y, dtype=np.float64)


def jacobi_sweeps(a_t, tol, max_sweeps):
    n = a_t.shape[0]
    v_t = np.eye(n, dtype=np.float64)
    sweep = 0
    rotated = True
    while rotated and sweep < max_sweeps:
        rotated = False
        sweep += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                ap = a_t[p]
                aq = a_t[q]
                alpha = float(ap @ ap)
                beta = float(aq @ aq)
                gamma = float(ap @ aq)
                if gamma == 0.0 or abs(gamma) <= tol * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + math.sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                a_t[p], a_t[q] = c * ap - s * aq, s * ap + c * aq
                vp = v_t[p]
                vq = v_t[q]
                v_t[p], v_t[q] = c * vp - s * vq, s * vp + c * vq
    return v_t, sweep
