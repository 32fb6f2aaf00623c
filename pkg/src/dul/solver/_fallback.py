"""Pure numpy/scipy versions of the compiled kernels."""

import numpy as np
from scipy.linalg import solve_banded


def _banded(sub, diag, sup):
    n = len(diag)
    ab = np.zeros((3, n))
    ab[0, 1:] = sup[:-1]
    ab[1] = diag
    ab[2, :-1] = sub[1:]
    return ab


def tridiag_solve(sub, diag, sup, rhs):
    """Solve a tridiagonal system; ``sub[0]`` and ``sup[-1]`` are ignored."""
    sub, diag, sup = (np.asarray(v, dtype=float) for v in (sub, diag, sup))
    try:
        return solve_banded((1, 1), _banded(sub, diag, sup), np.asarray(rhs, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise ZeroDivisionError("singular tridiagonal system") from exc


def _apply(sub, diag, sup, u):
    out = diag * u
    out[1:] += sub[1:] * u[:-1]
    out[:-1] += sup[:-1] * u[1:]
    return out


def theta_march(sub, diag, sup, r, m, dt, theta, u0, F=None):
    """Same contract as the compiled ``theta_march``."""
    sub, diag, sup, r, m = (np.asarray(v, dtype=float) for v in (sub, diag, sup, r, m))
    levels, n = m.size, diag.size
    U = np.zeros((levels, n))
    U[0] = u0
    if not np.all(np.isfinite(U[0])):
        return U, 0
    eye = np.zeros((3, n))
    eye[1] = 1.0
    ab = _banded(sub, diag, sup)
    for k in range(1, levels):
        ex = (1.0 - theta) * dt * m[k - 1]
        im = theta * dt * m[k]
        # overflow is reported through the returned index, not as a warning
        with np.errstate(over="ignore", invalid="ignore"):
            rhs = U[k - 1] + ex * (_apply(sub, diag, sup, U[k - 1]) + r) + im * r
            if F is not None:
                rhs = rhs + dt * ((1.0 - theta) * F[k - 1] + theta * F[k])
            try:
                U[k] = solve_banded((1, 1), eye - im * ab, rhs, check_finite=False)
            except (np.linalg.LinAlgError, ValueError):
                return U, k
        if not np.all(np.isfinite(U[k])):
            return U, k
    return U, -1
