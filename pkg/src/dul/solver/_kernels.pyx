# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tridiagonal kernels for the theta-scheme time march."""

import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()


cdef int _thomas(const double[:] a, const double[:] b, const double[:] c,
                 const double[:] d, double[:] x, double[:] cp, double[:] dp) noexcept nogil:
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t i
    cdef double den = b[0]
    if den == 0.0:
        return -1
    cp[0] = c[0] / den
    dp[0] = d[0] / den
    for i in range(1, n):
        den = b[i] - a[i] * cp[i - 1]
        if den == 0.0:
            return -1
        cp[i] = c[i] / den
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return 0


def tridiag_solve(sub, diag, sup, rhs):
    """Solve a tridiagonal system; ``sub[0]`` and ``sup[-1]`` are ignored."""
    cdef const double[:] a = np.ascontiguousarray(sub, dtype=np.float64)
    cdef const double[:] b = np.ascontiguousarray(diag, dtype=np.float64)
    cdef const double[:] c = np.ascontiguousarray(sup, dtype=np.float64)
    cdef const double[:] d = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef Py_ssize_t n = b.shape[0]
    out = np.empty(n)
    cdef double[:] x = out
    cdef double[:] cp = np.empty(n)
    cdef double[:] dp = np.empty(n)
    if _thomas(a, b, c, d, x, cp, dp) != 0:
        raise ZeroDivisionError("singular tridiagonal system")
    return out


def theta_march(sub, diag, sup, r, m, double dt, double theta, u0, F=None):
    """Run the theta-scheme for ``u' = m(t) (A u + r) + f``.

    ``A`` is tridiagonal (``sub``, ``diag``, ``sup``), ``m`` holds the
    modulation at every level and ``F`` (levels x n) the source.  Returns
    ``(U, bad)`` with ``bad`` the first level holding a non-finite value,
    or -1.  Levels after ``bad`` are left as zeros.
    """
    cdef const double[:] A_lo = np.ascontiguousarray(sub, dtype=np.float64)
    cdef const double[:] A_d = np.ascontiguousarray(diag, dtype=np.float64)
    cdef const double[:] A_up = np.ascontiguousarray(sup, dtype=np.float64)
    cdef const double[:] rr = np.ascontiguousarray(r, dtype=np.float64)
    cdef const double[:] mm = np.ascontiguousarray(m, dtype=np.float64)
    cdef Py_ssize_t n = A_d.shape[0]
    cdef Py_ssize_t levels = mm.shape[0]
    cdef bint has_f = F is not None
    cdef const double[:, :] FF
    if has_f:
        FF = np.ascontiguousarray(F, dtype=np.float64)
    else:
        FF = np.zeros((1, 1))
    U_arr = np.zeros((levels, n))
    cdef double[:, :] U = U_arr
    cdef double[:] lo = np.empty(n)
    cdef double[:] dg = np.empty(n)
    cdef double[:] up = np.empty(n)
    cdef double[:] rhs = np.empty(n)
    cdef double[:] cp = np.empty(n)
    cdef double[:] dp = np.empty(n)
    cdef const double[:] u0v = np.ascontiguousarray(u0, dtype=np.float64)
    cdef Py_ssize_t i, k
    cdef double ex, im, au
    cdef int bad = -1
    cdef int status = 0
    with nogil:
        for i in range(n):
            U[0, i] = u0v[i]
            if not isfinite(u0v[i]):
                bad = 0
        k = 1
        while k < levels and bad < 0:
            ex = (1.0 - theta) * dt * mm[k - 1]
            im = theta * dt * mm[k]
            for i in range(n):
                au = A_d[i] * U[k - 1, i] + rr[i]
                if i > 0:
                    au = au + A_lo[i] * U[k - 1, i - 1]
                if i < n - 1:
                    au = au + A_up[i] * U[k - 1, i + 1]
                rhs[i] = U[k - 1, i] + ex * au + im * rr[i]
                if has_f:
                    rhs[i] = rhs[i] + dt * ((1.0 - theta) * FF[k - 1, i] + theta * FF[k, i])
                lo[i] = -im * A_lo[i]
                dg[i] = 1.0 - im * A_d[i]
                up[i] = -im * A_up[i]
            status = _thomas(lo, dg, up, rhs, U[k], cp, dp)
            if status != 0:
                bad = k
                break
            for i in range(n):
                if not isfinite(U[k, i]):
                    bad = k
                    break
            k = k + 1
    return U_arr, bad
