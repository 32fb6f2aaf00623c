"""Barrier test functions and their certification on dense grids.

Two barrier families are built from the boundary distance ``d``:

* supercritical (``gamma > 2``): ``zeta = d**-beta - eps**-beta`` on the layer
  ``d <= eps`` with ``beta = (gamma - 2)/2``;
* subcritical (``1 <= gamma <= 2``): ``zeta = eps**beta - d**beta`` with
  ``beta = 2 - gamma`` (or a free ``b > 0`` when ``gamma == 2``).

In both cases ``xi = -zeta**2 / (2 (s - alpha1 t))`` with ``s = alpha1 (tau + delta)``
and ``zeta = 0`` on ``Omega^eps``.  The layer inequality

    xi_t + 5/2 a |grad xi|^2 + div(a grad xi) <= 0

and the cutoff inequality for ``eta`` are certified by sampling with exact
derivatives (no finite differences).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from dul.certificate import ClassCertificate

CERT_TOL = 1e-10
BISECTION_TOL = 1e-10
MIN_WINDOW = 1e-12

# quintic smoothstep S(y) = 6y^5 - 15y^4 + 10y^3 on [0, 1]
SMOOTHSTEP_MAX_SLOPE = 15.0 / 8.0
SMOOTHSTEP_MAX_CURVATURE = 10.0 / math.sqrt(3.0)
SHELL_SCALE = 6.0  # the ramp spans eps/2 .. 2 eps/3, i.e. a width of eps/6


class InadmissibleConstants(ValueError):
    """No barrier parameters satisfy the admissibility inequalities."""


class Constants(NamedTuple):
    """Envelope and geometry constants entering the parameter rules."""

    ct0: float
    c0: float
    c1: float
    k0: float
    nu0: float


def constants_for(coef, geom, eps):
    ct0, c0, c1 = coef.envelope_constants()
    k0, nu0 = geom.regularity_constants(eps)
    return Constants(ct0, c0, c1, k0, nu0)


# ---------------------------------------------------------------------------
# regularizer and cutoff


@dataclass(frozen=True)
class Regularizer:
    """Smooth convex surrogate ``psi(z) = sqrt(z^2 + alpha)`` for ``|z|``."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("regularizer needs alpha > 0")

    def __call__(self, z):
        return np.sqrt(np.square(z) + self.alpha)

    def prime(self, z):
        return np.asarray(z) / self(z)

    def second(self, z):
        return self.alpha / self(z) ** 3


def smoothstep(y):
    """Quintic smoothstep and its first two derivatives, clamped to [0, 1]."""
    y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
    s = y**3 * (10.0 + y * (-15.0 + 6.0 * y))
    s1 = 30.0 * y**2 * (1.0 - y) ** 2
    s2 = 60.0 * y * (1.0 - y) * (1.0 - 2.0 * y)
    return s, s1, s2


@dataclass(frozen=True)
class CutoffFunction:
    """``eta_eps``: 0 for ``d <= eps/2``, 1 for ``d >= 2 eps/3``, quintic ramp between."""

    eps: float

    @property
    def A1(self):
        return SHELL_SCALE * SMOOTHSTEP_MAX_SLOPE

    @property
    def A2(self):
        return SHELL_SCALE**2 * SMOOTHSTEP_MAX_CURVATURE

    def profile(self, d):
        """``(eta, d eta/dd, d^2 eta/dd^2)`` as functions of the distance."""
        d = np.asarray(d, dtype=float)
        k = SHELL_SCALE / self.eps
        y = (d - 0.5 * self.eps) * k
        s, s1, s2 = smoothstep(y)
        inside = (y > 0.0) & (y < 1.0)
        return s, np.where(inside, s1 * k, 0.0), np.where(inside, s2 * k * k, 0.0)

    def __call__(self, geom, x):
        return self.profile(geom.distance(x))[0]

    def gradient(self, geom, x):
        _, e1, _ = self.profile(geom.distance(x))
        return e1 * _safe_grad(geom, x)

    def laplacian(self, geom, x):
        _, e1, e2 = self.profile(geom.distance(x))
        g = _safe_grad(geom, x)
        return e2 * g * g + e1 * _safe_lap(geom, x)


def cutoff_constants(cutoff=None):
    """``(A1, A2)`` with ``|grad eta| <= A1/eps`` and ``|eta''| <= A2/eps^2``."""
    c = cutoff or CutoffFunction(1.0)
    return c.A1, c.A2


def _safe_grad(geom, x):
    x = np.asarray(x, dtype=float)
    on_ridge = x == geom.ridge
    if np.any(on_ridge):
        out = np.zeros_like(x)
        out[~on_ridge] = geom.grad_distance(x[~on_ridge])
        return out
    return geom.grad_distance(x)


def _safe_lap(geom, x):
    x = np.asarray(x, dtype=float)
    on_ridge = x == geom.ridge
    if np.any(on_ridge):
        out = np.zeros_like(x)
        out[~on_ridge] = geom.laplacian_distance(x[~on_ridge])
        return out
    return geom.laplacian_distance(x)


# ---------------------------------------------------------------------------
# barrier types


@dataclass(frozen=True)
class _Barrier:
    gamma: float
    eps: float
    tau: float
    beta: float
    alpha1: float
    delta: float
    constants: Constants
    checked: bool = field(default=True, compare=False)

    @property
    def s(self):
        return self.alpha1 * (self.tau + self.delta)

    @property
    def singular_time(self):
        return self.s / self.alpha1

    def window(self):
        """Open time interval ``(tau - delta, tau)`` on which the claim is made."""
        return self.tau - self.delta, self.tau

    def with_overrides(self, **changes):
        """Copy with some parameters replaced and invariants left unchecked.

        Used for negative controls; the result is flagged ``checked=False``.
        """
        return replace(self, checked=False, **changes)

    def params(self):
        out = {k: getattr(self, k) for k in self._param_names}
        out.update(s=self.s, constants=self.constants._asdict(), checked=self.checked)
        return out

    def zeta_profile(self, d):
        raise NotImplementedError


@dataclass(frozen=True)
class SupercriticalBarrier(_Barrier):
    """Barrier for ``gamma > 2``: exponential-weight uniqueness class."""

    theta: float = 1.0
    c: float = 0.0
    sigma: float = 0.0

    _param_names = ("gamma", "eps", "tau", "theta", "beta", "c", "sigma", "alpha1", "delta")

    def zeta_profile(self, d):
        d = np.asarray(d, dtype=float)
        b = self.beta
        layer = d <= self.eps
        dd = np.where(layer, d, self.eps)
        z = np.where(layer, dd**-b - self.eps**-b, 0.0)
        z1 = np.where(layer, -b * dd ** (-b - 1.0), 0.0)
        z2 = np.where(layer, b * (b + 1.0) * dd ** (-b - 2.0), 0.0)
        return z, z1, z2

    def delta_bounds(self):
        g, k = self.gamma, self.constants
        shell = ((1.5) ** ((g - 2.0) / 2.0) - 1.0) ** 2 / (4.0 * self.theta * self.alpha1)
        return {
            "layer": self.sigma**2 / ((g - 2.0) * (k.c1 + k.c0)),
            "tau": self.tau,
            "growth": shell,
        }

    def alpha1_bound(self):
        g, c0 = self.gamma, self.constants.c0
        return max(10.0 * c0 * (g - 2.0) ** 2 / self.sigma**2, 1.25 * c0 * (g - 2.0) ** 2)

    def time_cap(self):
        """Constant cap on the time step used by the telescoping iteration."""
        b = self.delta_bounds()
        return min(b["layer"], b["growth"])

    def violations(self):
        out = []
        g, k = self.gamma, self.constants
        if not g > 2:
            out.append("supercritical barrier needs gamma > 2")
            return out
        if not math.isclose(self.beta, (g - 2.0) / 2.0, rel_tol=1e-14):
            out.append("beta must equal (gamma - 2)/2")
        if not 0 < self.c < 0.5:
            out.append("c must lie in (0, 1/2)")
        lhs = layer_balance_super(self.c, g, k)
        if not lhs < 0:
            out.append(f"layer balance inequality fails: {lhs:.3e} >= 0")
        sigma = 1.0 - (1.0 - self.c) ** ((g - 2.0) / 2.0)
        if not math.isclose(self.sigma, sigma, rel_tol=1e-12):
            out.append("sigma inconsistent with c")
        if not self.alpha1 >= self.alpha1_bound():
            out.append(f"alpha1={self.alpha1:.6g} below required {self.alpha1_bound():.6g}")
        if not 0 < self.delta < min(self.delta_bounds().values()):
            out.append(f"delta={self.delta:.6g} outside (0, {min(self.delta_bounds().values()):.6g})")
        return out


@dataclass(frozen=True)
class SubcriticalBarrier(_Barrier):
    """Barrier for ``1 <= gamma <= 2``: shell (power-weight) uniqueness class."""

    ell: float = 0.0
    sigma_bar: float = 0.0
    b: float = 1.0

    _param_names = ("gamma", "eps", "tau", "beta", "ell", "sigma_bar", "alpha1", "delta", "b")

    def zeta_profile(self, d):
        d = np.asarray(d, dtype=float)
        b = self.beta
        layer = d <= self.eps
        dd = np.where(layer, d, self.eps)
        z = np.where(layer, self.eps**b - dd**b, 0.0)
        z1 = np.where(layer, -b * dd ** (b - 1.0), 0.0)
        z2 = np.where(layer, -b * (b - 1.0) * dd ** (b - 2.0), 0.0)
        return z, z1, z2

    def delta_bounds(self):
        g, k = self.gamma, self.constants
        return {"layer": subcritical_cap(g, self.sigma_bar, k, self.b) * self.eps ** (4.0 - 2.0 * g),
                "tau": self.tau}

    def alpha1_bound(self):
        c0 = self.constants.c0
        bb = self.beta
        return max(40.0 * c0 * bb**2 / self.sigma_bar**2, 5.0 * c0 * bb**2)

    def time_cap(self):
        """Coefficient ``c`` of the rule ``delta < c * eps**(4 - 2 gamma)``."""
        return subcritical_cap(self.gamma, self.sigma_bar, self.constants, self.b)

    def violations(self):
        out = []
        g, k = self.gamma, self.constants
        if not 1 <= g <= 2:
            out.append("subcritical barrier needs 1 <= gamma <= 2")
            return out
        expected = self.b if g == 2 else 2.0 - g
        if not math.isclose(self.beta, expected, rel_tol=1e-14):
            out.append(f"beta must equal {expected}")
        if not 0 < self.ell < 0.5:
            out.append("ell must lie in (0, 1/2)")
        lhs = layer_balance_sub(self.ell, self.beta, k)
        if not lhs < 0:
            out.append(f"layer balance inequality fails: {lhs:.3e} >= 0")
        if not math.isclose(self.sigma_bar, 1.0 - (1.0 - self.ell) ** self.beta, rel_tol=1e-12):
            out.append("sigma_bar inconsistent with ell")
        if not self.alpha1 >= self.alpha1_bound():
            out.append(f"alpha1={self.alpha1:.6g} below required {self.alpha1_bound():.6g}")
        if not 0 < self.delta < min(self.delta_bounds().values()):
            out.append(f"delta={self.delta:.6g} outside (0, {min(self.delta_bounds().values()):.6g})")
        return out


def subcritical_cap(gamma, sigma_bar, k, b=1.0):
    if gamma < 2:
        return sigma_bar**2 / (16.0 * (2.0 - gamma) * (k.c1 + k.c0))
    return sigma_bar**2 / (16.0 * b * (k.c1 + max(b - 1.0, 0.0) + k.c0))


def layer_balance_super(c, gamma, k):
    beta = (gamma - 2.0) / 2.0
    return ((1.0 - c) ** (-beta) - 1.0) * (k.c1 + k.c0 * k.k0) - beta * k.nu0 * k.ct0


def layer_balance_sub(ell, beta, k):
    return (1.0 - (1.0 - ell) ** beta) * (k.c1 + k.c0 * k.k0) - beta * k.nu0 * k.ct0


def admissible_supremum(balance, upper=0.5, tol=BISECTION_TOL):
    """Supremum of ``x in (0, upper)`` with ``balance(x) < 0`` for increasing ``balance``."""
    if balance(upper) < 0:
        return upper
    lo, hi = 0.0, upper
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if balance(mid) < 0:
            lo = mid
        else:
            hi = mid
    return lo


def _positive_constants(k):
    bad = [name for name, v in k._asdict().items() if name != "k0" and not v > 0]
    if bad or k.k0 < 0:
        raise InadmissibleConstants(f"constants must be positive (k0 >= 0): {', '.join(bad) or 'k0'}")


def select_supercritical_params(gamma, constants, tau, theta, eps, eps0=None):
    """Admissible supercritical barrier.

    ``c`` is half the admissible supremum in ``(0, 1/2)`` and ``delta`` half
    of its upper bound.
    """
    k = Constants(*constants)
    if not gamma > 2:
        raise ValueError("supercritical selection needs gamma > 2")
    if not (tau > 0 and theta > 0 and eps > 0):
        raise ValueError("tau, theta and eps must be positive")
    if eps0 is not None and not eps < eps0:
        raise ValueError(f"eps={eps} must be below eps0={eps0}")
    _positive_constants(k)
    beta = (gamma - 2.0) / 2.0
    sup = admissible_supremum(lambda c: layer_balance_super(c, gamma, k))
    if sup <= BISECTION_TOL:
        raise InadmissibleConstants(
            "layer balance [(1-c)^-beta - 1](c1 + c0*k0) < beta*nu0*ct0 has no root above the bisection tolerance"
        )
    c = 0.5 * sup
    sigma = 1.0 - (1.0 - c) ** beta
    alpha1 = max(10.0 * k.c0 * (gamma - 2.0) ** 2 / sigma**2, 1.25 * k.c0 * (gamma - 2.0) ** 2)
    bar = SupercriticalBarrier(gamma, eps, tau, beta, alpha1, 1.0, k, True, theta, c, sigma)
    delta = 0.5 * min(bar.delta_bounds().values())
    if delta < MIN_WINDOW * tau:
        raise InadmissibleConstants(
            f"layer balance [(1-c)^-beta - 1](c1 + c0*k0) < beta*nu0*ct0 only holds for c < {sup:.3e}; "
            f"the resulting time window delta={delta:.3e} is below double-precision resolution"
        )
    bar = replace(bar, delta=delta)
    problems = bar.violations()
    if problems:
        raise InadmissibleConstants("; ".join(problems))
    return bar


def select_subcritical_params(gamma, constants, tau, eps, b=1.0, eps0=None):
    """Admissible subcritical barrier (``ell`` half the admissible supremum)."""
    k = Constants(*constants)
    if not 1 <= gamma <= 2:
        raise ValueError("subcritical selection needs 1 <= gamma <= 2")
    if not (tau > 0 and eps > 0 and b > 0):
        raise ValueError("tau, eps and b must be positive")
    if eps0 is not None and not eps < eps0:
        raise ValueError(f"eps={eps} must be below eps0={eps0}")
    _positive_constants(k)
    beta = b if gamma == 2 else 2.0 - gamma
    sup = admissible_supremum(lambda ell: layer_balance_sub(ell, beta, k))
    if sup <= BISECTION_TOL:
        raise InadmissibleConstants(
            "layer balance [1 - (1-ell)^beta](c1 + c0*k0) < beta*nu0*ct0 has no root above the bisection tolerance"
        )
    ell = 0.5 * sup
    sigma_bar = 1.0 - (1.0 - ell) ** beta
    alpha1 = max(40.0 * k.c0 * beta**2 / sigma_bar**2, 5.0 * k.c0 * beta**2)
    bar = SubcriticalBarrier(gamma, eps, tau, beta, alpha1, 1.0, k, True, ell, sigma_bar, float(b))
    delta = 0.5 * min(bar.delta_bounds().values())
    if delta < MIN_WINDOW * tau:
        raise InadmissibleConstants(
            f"layer balance only holds for ell < {sup:.3e}; time window delta={delta:.3e} is unresolvable"
        )
    bar = replace(bar, delta=delta)
    problems = bar.violations()
    if problems:
        raise InadmissibleConstants("; ".join(problems))
    return bar


def select_params(coef, geom, eps, tau, theta=1.0, b=1.0):
    """Pick the barrier family from ``coef.gamma`` and select its parameters."""
    k = constants_for(coef, geom, eps)
    if coef.gamma > 2:
        return select_supercritical_params(coef.gamma, k, tau, theta, eps, geom.eps0)
    if 1 <= coef.gamma <= 2:
        return select_subcritical_params(coef.gamma, k, tau, eps, b, geom.eps0)
    raise ValueError("barriers exist only for gamma >= 1")


# ---------------------------------------------------------------------------
# evaluation


class SingularTime(ValueError):
    pass


def _denominator(barrier, t):
    t = np.asarray(t, dtype=float)
    den = barrier.s - barrier.alpha1 * t
    if np.any(den == 0):
        raise SingularTime(f"xi is singular at t = s/alpha1 = {barrier.singular_time}")
    return den


def eval_zeta(barrier, geom, x):
    out = barrier.zeta_profile(geom.distance(x))[0]
    return float(out) if np.ndim(out) == 0 else out


def eval_xi(barrier, geom, x, t):
    z = barrier.zeta_profile(geom.distance(x))[0]
    out = -(z**2) / (2.0 * _denominator(barrier, t))
    return float(out) if np.ndim(out) == 0 else out


class XiDerivatives(NamedTuple):
    dt_xi: np.ndarray
    grad_xi: np.ndarray
    div_a_grad_xi: np.ndarray
    on_interface: np.ndarray


def eval_xi_derivatives(barrier, coef, geom, x, t):
    """Exact ``(xi_t, grad xi, div(a grad xi))`` on the layer side of ``d = eps``.

    Points with ``d == eps`` get the layer-side values and ``on_interface``
    set.  Gradients are the component along the coordinate axis.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    d = geom.distance(x)
    z, z1, z2 = barrier.zeta_profile(d)
    g = _safe_grad(geom, x)
    lap = _safe_lap(geom, x)
    m = coef.modulation(t)
    a = m * coef.spatial(d)
    a_d = m * coef.spatial_derivative(d)
    den = _denominator(barrier, t)
    dt_xi = -barrier.alpha1 * z**2 / (2.0 * den**2)
    grad_zeta = z1 * g
    grad_xi = -z * grad_zeta / den
    lap_zeta = z2 * g * g + z1 * lap
    div = -(a_d * g * z * grad_zeta) / den - a * (grad_zeta**2 + z * lap_zeta) / den
    return XiDerivatives(dt_xi, grad_xi, div, np.asarray(d == barrier.eps))


def layer_expression(barrier, coef, geom, x, t):
    """``xi_t + 5/2 a |grad xi|^2 + div(a grad xi)`` at the given samples."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    dt_xi, grad_xi, div, _ = eval_xi_derivatives(barrier, coef, geom, x, t)
    a = coef.modulation(t) * coef.spatial(geom.distance(x))
    return dt_xi + 2.5 * a * grad_xi**2 + div


# ---------------------------------------------------------------------------
# grids


def layer_distances(eps, n):
    """``n`` distances in ``(0, eps)``: half uniform, half log-spaced towards 0."""
    n_uni = n // 2
    n_log = n - n_uni
    uni = (np.arange(n_uni) + 0.5) / n_uni * eps
    logd = eps * np.logspace(-8.0, 0.0, n_log, endpoint=False)
    return np.unique(np.concatenate([uni, logd]))


def layer_grid(geom, eps, n_space=10_000):
    """Spatial samples in the layer ``0 < d < eps`` (ridge and ``d = eps`` excluded)."""
    if geom.kind == "interval":
        d = layer_distances(eps, max(n_space // 2, 1))
    else:
        d = layer_distances(eps, n_space)
    x, _ = geom.points_at_distance(d)
    return x


def window_times(barrier, n_time=100):
    lo, hi = barrier.window()
    return lo + (np.arange(n_time) + 0.5) / n_time * (hi - lo)


def _chunks(arr, n):
    n = max(1, min(n, arr.size))
    return np.array_split(arr, n)


def _serial_map(fn, items):
    return list(map(fn, items))


# ---------------------------------------------------------------------------
# certificates


def _verify_layer(claim, barrier, coef, geom, xs, ts, pmap, chunks):
    xs = np.asarray(xs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    pmap = pmap or _serial_map

    def worst_in(tchunk):
        vals = layer_expression(barrier, coef, geom, xs[:, None], tchunk[None, :])
        i = np.unravel_index(np.argmax(vals), vals.shape)
        return float(vals[i]), float(xs[i[0]]), float(tchunk[i[1]])

    results = pmap(worst_in, _chunks(ts, chunks))
    value, wx, wt = max(results, key=lambda r: r[0])
    return ClassCertificate(
        claim=claim,
        passed=value <= CERT_TOL,
        worst_value=value,
        worst_point=(wx, wt),
        grid_size=int(xs.size * ts.size),
        params=barrier.params(),
    )


def verify_E1(barrier, coef, geom, xs=None, ts=None, n_space=10_000, n_time=100, pmap=None, chunks=4):
    """Certify the layer inequality for a supercritical barrier.

    Default grid: ``n_space`` points in ``0 < d < eps`` times ``n_time`` points
    in ``(tau - delta, tau)``.  Passes iff the largest value is <= 1e-10.
    """
    if not isinstance(barrier, SupercriticalBarrier):
        raise TypeError("E1 certification needs a supercritical barrier")
    xs = layer_grid(geom, barrier.eps, n_space) if xs is None else xs
    ts = window_times(barrier, n_time) if ts is None else ts
    return _verify_layer("E1", barrier, coef, geom, xs, ts, pmap, chunks)


def verify_D1(barrier, coef, geom, xs=None, ts=None, n_space=10_000, n_time=100, pmap=None, chunks=4):
    """Certify the layer inequality for a subcritical barrier."""
    if not isinstance(barrier, SubcriticalBarrier):
        raise TypeError("D1 certification needs a subcritical barrier")
    xs = layer_grid(geom, barrier.eps, n_space) if xs is None else xs
    ts = window_times(barrier, n_time) if ts is None else ts
    return _verify_layer("D1", barrier, coef, geom, xs, ts, pmap, chunks)


def cutoff_expression(cutoff, coef, geom, x, t):
    """``eta div(a grad eta) + 5/2 |grad eta|^2 a``."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    d = geom.distance(x)
    eta, e1, e2 = cutoff.profile(d)
    g = _safe_grad(geom, x)
    lap = _safe_lap(geom, x)
    m = coef.modulation(t)
    a = m * coef.spatial(d)
    a_d = m * coef.spatial_derivative(d)
    grad_eta = e1 * g
    lap_eta = e2 * g * g + e1 * lap
    return eta * (a_d * g * grad_eta + a * lap_eta) + 2.5 * grad_eta**2 * a


def cutoff_bound_constant(coef, geom, pointwise):
    """Analytic constant bounding the cutoff expression over the shell.

    Scaled by ``eps**(gamma-2)`` (``pointwise=False``) or by ``d**(gamma-2)``
    (``pointwise=True``), with ``y = d/eps`` at its largest shell value 2/3.
    """
    A1, A2 = cutoff_constants()
    _, c0, c1 = coef.envelope_constants()
    p = coef.exponent
    A2k = A2 + A1 * geom.k0 * geom.eps0
    y = 2.0 / 3.0
    if pointwise:
        return c1 * A1 * y + c0 * y**2 * (A2k + 2.5 * A1**2)
    return c1 * A1 * y ** (p - 1.0) + c0 * y**p * (A2k + 2.5 * A1**2)


def shell_grid(geom, eps, n_space):
    if geom.kind == "interval":
        n_space = max(n_space // 2, 1)
    d = 0.5 * eps + (np.arange(n_space) + 0.5) / n_space * (eps / 6.0)
    return geom.points_at_distance(d)[0]


def _verify_cutoff(claim, coef, geom, eps_sweep, ts, n_space, pointwise, spread_tol):
    eps_sweep = [float(e) for e in eps_sweep]
    if not eps_sweep:
        raise ValueError("empty eps sweep")
    ts = np.atleast_1d(np.asarray([0.0] if ts is None else ts, dtype=float))
    p = coef.exponent
    bound = cutoff_bound_constant(coef, geom, pointwise)
    ratios, points = [], []
    for eps in eps_sweep:
        x = shell_grid(geom, eps, n_space)
        vals = cutoff_expression(CutoffFunction(eps), coef, geom, x[:, None], ts[None, :])
        if pointwise:
            vals = vals / geom.distance(x)[:, None] ** (p - 2.0)
        else:
            vals = vals / eps ** (p - 2.0)
        i = np.unravel_index(np.argmax(vals), vals.shape)
        ratios.append(float(vals[i]))
        points.append((float(x[i[0]]), float(ts[i[1]])))
    ratios_arr = np.array(ratios)
    top = float(np.max(np.abs(ratios_arr)))
    spread = float(ratios_arr.max() - ratios_arr.min()) / top if top > 0 else 0.0
    bounded = bool(np.all(ratios_arr <= bound))
    passed = bounded and (spread_tol is None or spread <= spread_tol)
    j = int(np.argmax(ratios_arr))
    return ClassCertificate(
        claim=claim,
        passed=passed,
        worst_value=float(ratios_arr[j]),
        worst_point=points[j],
        grid_size=int(len(eps_sweep) * ts.size * n_space),
        params={"gamma": coef.gamma, "C1": bound, "eps_sweep": eps_sweep},
        data={"ratios": ratios, "spread": spread, "bounded": bounded},
    )


def verify_E2(coef, geom, eps_sweep, ts=None, n_space=10_000, spread_tol=0.2):
    """Sweep ``sup_shell(...) / eps**(gamma-2)``; pass iff bounded by C1 and stable."""
    return _verify_cutoff("E2", coef, geom, eps_sweep, ts, n_space, False, spread_tol)


def verify_D2(coef, geom, eps_sweep, ts=None, n_space=10_000, spread_tol=None):
    """Sweep the pointwise ratio against ``d**(gamma-2)``; pass iff bounded by C1."""
    return _verify_cutoff("D2", coef, geom, eps_sweep, ts, n_space, True, spread_tol)


def normal_derivative_check(barrier, geom, t_samples, n_steps=5):
    """One-sided normal derivative of ``xi`` on ``d = eps`` from the layer side.

    The exact value is ``-zeta zeta' / (s - alpha1 t)`` with ``zeta(eps) = 0``.
    Passes iff it is <= 1e-10 in magnitude and the one-sided difference
    quotients vanish linearly as the step shrinks.
    """
    ts = np.atleast_1d(np.asarray(t_samples, dtype=float))
    den = _denominator(barrier, ts)
    eps = barrier.eps
    z, z1, _ = barrier.zeta_profile(np.array([eps]))
    exact = np.abs(z[0] * z1[0] / den)
    hs = eps * 10.0 ** -np.arange(2, 2 + n_steps)
    zh = barrier.zeta_profile(eps - hs)[0]
    # xi(eps) = 0, so the one-sided quotient is |xi(eps - h)| / h
    quot = (zh[:, None] ** 2 / (2.0 * np.abs(den)[None, :])) / hs[:, None]
    rates = quot[1:] / quot[:-1]
    linear = bool(np.all(rates < 0.2))
    worst = float(exact.max())
    j = int(np.argmax(exact))
    return ClassCertificate(
        claim="normal_derivative",
        passed=worst <= CERT_TOL and linear,
        worst_value=worst,
        worst_point=(float(eps), float(ts[j])),
        grid_size=int(ts.size),
        params=barrier.params(),
        data={"steps": hs.tolist(), "quotient_max": quot.max(axis=1).tolist(), "linear_decay": linear},
    )


def shell_xi_bound(barrier):
    """Upper bound of ``xi`` on the cutoff shell for a supercritical barrier."""
    b = barrier.beta
    cc = (1.5**b - 1.0) ** 2
    return -cc * barrier.eps ** (-2.0 * b) / (4.0 * barrier.alpha1 * barrier.delta)
