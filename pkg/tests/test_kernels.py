import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dul.solver import _fallback, kernels

compiled = pytest.importorskip("dul.solver._kernels")


def _system(n, rng):
    sub = rng.uniform(0.1, 1.0, n)
    sup = rng.uniform(0.1, 1.0, n)
    diag = -(sub + sup) - rng.uniform(0.0, 1.0, n)
    return sub, diag, sup


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 200), st.integers(0, 2**31 - 1))
def test_tridiag_parity(n, seed):
    rng = np.random.default_rng(seed)
    sub, diag, sup = _system(n, rng)
    rhs = rng.normal(size=n)
    a = np.asarray(compiled.tridiag_solve(sub, diag, sup, rhs))
    b = _fallback.tridiag_solve(sub, diag, sup, rhs)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
    M = np.diag(diag) + np.diag(sub[1:], -1) + np.diag(sup[:-1], 1)
    assert np.allclose(M @ a, rhs, atol=1e-10)


@pytest.mark.parametrize("theta", [0.0, 0.5, 1.0])
def test_theta_march_parity(theta):
    rng = np.random.default_rng(3)
    n = 64
    sub, diag, sup = (v * 10 for v in _system(n, rng))
    r = rng.normal(size=n)
    m = 1.0 + 0.2 * np.cos(np.linspace(0, 3, 41))
    u0 = rng.normal(size=n)
    F = rng.normal(size=(41, n))
    dt = 1e-3
    Uc, bc = compiled.theta_march(sub, diag, sup, r, m, dt, theta, u0, F)
    Up, bp = _fallback.theta_march(sub, diag, sup, r, m, dt, theta, u0, F)
    assert bc == bp == -1
    assert np.allclose(np.asarray(Uc), Up, rtol=1e-12, atol=1e-12)


def test_theta_march_reports_blowup():
    n = 8
    sub = np.full(n, 1e300)
    sup = np.full(n, 1e300)
    diag = np.full(n, -2e300)
    u0 = np.linspace(1, 2, n)
    m = np.ones(4)
    for impl in (compiled, _fallback):
        _, bad = impl.theta_march(sub, diag, sup, np.zeros(n), m, 1e10, 0.0, u0, None)
        assert bad >= 1


def test_backend_selected():
    forced = os.environ.get("DUL_PURE_PYTHON", "") not in ("", "0")
    assert kernels.BACKEND == ("python" if forced else "compiled")


def test_pure_python_env_forces_fallback():
    env = dict(os.environ, DUL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from dul.solver import BACKEND; print(BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
