"""Theta-scheme time stepping, residuals and the discrete subsolution check."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dul.barriers import Regularizer
from dul.certificate import ClassCertificate
from dul.solver import kernels
from dul.solver.operator import GridFunction, active_volumes, assemble
from dul.weighted_norms import SampledField

DEFAULT_STEPS = 2048


class CFLViolation(ValueError):
    pass


class BlowUp(FloatingPointError):
    pass


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time levels of a solve.  ``values`` has shape ``(levels, nodes)``.

    Inactive nodes (outside a clamp region) hold the clamp data.
    """

    mesh: object
    times: np.ndarray
    values: np.ndarray
    active: np.ndarray
    volumes: np.ndarray

    @property
    def levels(self):
        return self.times.size

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def level(self, k):
        return GridFunction(self.mesh, self.values[k], float(self.times[k]))

    def final(self):
        return self.level(-1)

    def as_field(self, active_only=True):
        """Sampled field for the weighted-norm routines (active nodes only by default)."""
        keep = self.active if active_only else np.ones_like(self.active)
        vols = np.zeros(self.mesh.size)
        vols[self.active] = self.volumes
        if not active_only:
            vols[~self.active] = self.mesh.volumes[~self.active]
        scale = self.mesh.geom.sphere_area()
        return SampledField(self.mesh.nodes[keep], self.times, self.values[:, keep], vols[keep] * scale)


def cfl_limit(asm, m_hi, theta):
    """Largest stable step for ``theta < 1/2`` (infinite otherwise)."""
    if theta >= 0.5:
        return math.inf
    top = float(np.max(np.abs(asm.diag))) * m_hi
    return math.inf if top == 0 else 1.0 / ((1.0 - 2.0 * theta) * top)


def _check_theta(theta):
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta_scheme must lie in [0, 1]")


def step_theta(spec, mesh, u_level, t, dt, theta_scheme=1.0):
    """One theta-scheme step from ``t`` to ``t + dt``."""
    _check_theta(theta_scheme)
    asm = assemble(spec, mesh)
    m = spec.coefficient.modulation
    if dt > cfl_limit(asm, m.m_hi, theta_scheme):
        raise CFLViolation(f"dt={dt:.3e} exceeds the explicit stability bound {cfl_limit(asm, m.m_hi, theta_scheme):.3e}")
    u = np.asarray(getattr(u_level, "values", u_level), dtype=float).copy()
    act = asm.active
    xa = mesh.nodes[act]
    F = np.vstack([spec.f(xa, t), spec.f(xa, t + dt)])
    U, bad = kernels.theta_march(asm.sub, asm.diag, asm.sup, asm.r, np.array([m(t), m(t + dt)]),
                                 dt, theta_scheme, u[act], F)
    if bad >= 0:
        raise BlowUp(f"non-finite values at t={t + dt:.6g}")
    out = asm.fill.copy()
    out[act] = U[1]
    return GridFunction(mesh, out, t + dt)


def solve(spec, mesh, dt=None, theta_scheme=1.0, start_steps=0):
    """Trajectory on ``[0, T]`` with ``ceil(T/dt)`` uniform steps.

    ``start_steps`` implicit Euler steps precede the chosen scheme (a
    Rannacher start that damps the Crank-Nicolson response to rough data).
    """
    _check_theta(theta_scheme)
    T = spec.T
    dt = T / DEFAULT_STEPS if dt is None else float(dt)
    if not dt > 0:
        raise ValueError("dt must be positive")
    steps = max(1, math.ceil(T / dt - 1e-9))
    dt = T / steps
    asm = assemble(spec, mesh)
    mod = spec.coefficient.modulation
    limit = cfl_limit(asm, mod.m_hi, theta_scheme)
    if dt > limit:
        raise CFLViolation(f"dt={dt:.3e} exceeds the explicit stability bound {limit:.3e}")
    times = np.linspace(0.0, T, steps + 1)
    act = asm.active
    xa = mesh.nodes[act]
    u0 = np.broadcast_to(np.asarray(spec.initial(mesh.nodes), dtype=float), mesh.nodes.shape).copy()
    m = np.asarray(mod(times), dtype=float)
    F = None
    if spec.source is not None:
        F = np.asarray(spec.f(xa[None, :], times[:, None]), dtype=float)
        F = np.broadcast_to(F, (times.size, xa.size))
    U = np.empty((times.size, xa.size))
    k0 = min(start_steps, steps)
    start = u0[act]
    if k0 > 0:
        head, bad = kernels.theta_march(asm.sub, asm.diag, asm.sup, asm.r, m[: k0 + 1], dt, 1.0, start,
                                        None if F is None else F[: k0 + 1])
        _raise_bad(bad, times)
        U[: k0 + 1] = head
        start = head[-1]
    tail, bad = kernels.theta_march(asm.sub, asm.diag, asm.sup, asm.r, m[k0:], dt, theta_scheme, start,
                                    None if F is None else F[k0:])
    _raise_bad(bad if bad < 0 else bad + k0, times)
    U[k0:] = tail
    values = np.broadcast_to(asm.fill, (times.size, mesh.size)).copy()
    values[:, act] = U
    return Trajectory(mesh, times, values, act, active_volumes(spec, mesh))


def _raise_bad(bad, times):
    if bad >= 0:
        raise BlowUp(f"solution blew up (non-finite values) at t={times[bad]:.6g}")


def _pointwise_defect(spec, mesh, traj, values=None, d_min=None, t_min=0.0):
    """``(u^{k+1} - u^{k-1}) / 2dt - L(t_k) u^k - f`` at active interior nodes.

    Returns the defect and source on levels with ``t_k >= t_min``.
    """
    if traj.levels < 3:
        raise ValueError("residual needs at least three time levels")
    asm = assemble(spec, mesh)
    act = asm.active
    U = traj.values if values is None else values
    Ua = U[:, act]
    t = traj.times
    dt = np.diff(t)
    dudt = (Ua[2:] - Ua[:-2]) / (t[2:] - t[:-2])[:, None]
    m = spec.coefficient.modulation(t[1:-1])
    LU = np.array([asm.apply(row) for row in Ua[1:-1]]) * np.asarray(m)[:, None]
    F = spec.f(mesh.nodes[act][None, :], t[1:-1][:, None])
    if not np.allclose(dt, dt[0], rtol=1e-9):
        raise ValueError("residual assumes uniform time steps")
    mask = interior_mask(spec, mesh, d_min)[act]
    keep = t[1:-1] >= t_min
    return (dudt - LU)[keep], np.asarray(F)[keep], mask


def interior_mask(spec, mesh, d_min=None):
    """Nodes used by residual checks: ``d >= d_min`` (default: two cells from the active edge)."""
    asm = assemble(spec, mesh)
    d = mesh.distance
    if d_min is None:
        idx = np.flatnonzero(asm.active)
        keep = np.zeros(mesh.size, dtype=bool)
        inner = idx[2:-2] if mesh.geom.kind == "interval" else idx[:-2]
        keep[inner] = True
        return keep
    return asm.active & (d >= d_min)


def residual(spec, mesh, traj, d_min=None, t_min=0.0):
    """Max of ``|u_t - L u - f|`` over interior nodes and interior times.

    ``u_t`` is the centred difference in time; ``d_min`` sets the
    near-boundary exclusion (default two cells inside the active region)
    and ``t_min`` skips an initial layer caused by incompatible data.
    """
    defect, F, mask = _pointwise_defect(spec, mesh, traj, d_min=d_min, t_min=t_min)
    vals = np.abs(defect - F)[:, mask]
    return float(vals.max()) if vals.size else 0.0


def subsolution_check(traj, alpha, spec, mesh, barrier=None, d_min=None, tol=None, t_min=0.0):
    """Discrete check that ``psi_alpha(u)`` is a subsolution.

    Verifies ``d_t psi(u) - L psi(u) - psi'(u) f <= tol`` at interior nodes,
    with ``tol`` ten times the PDE residual scale.  With a ``barrier`` the
    check is restricted to ``Omega^{eps/2}``.
    """
    if not alpha > 0:
        raise ValueError("regularizer needs alpha > 0 (psi is not C2 at zero otherwise)")
    psi = Regularizer(alpha)
    if barrier is not None:
        d_min = max(d_min or 0.0, 0.5 * barrier.eps)
    res = residual(spec, mesh, traj, d_min, t_min)
    if tol is None:
        tol = 10.0 * max(res, 1e-12)
    v = psi(traj.values)
    defect, F, mask = _pointwise_defect(spec, mesh, traj, values=v, d_min=d_min, t_min=t_min)
    act = assemble(spec, mesh).active
    keep = traj.times[1:-1] >= t_min
    dpsi = psi.prime(traj.values[1:-1][keep][:, act])
    vals = (defect - dpsi * F)[:, mask]
    worst = float(vals.max()) if vals.size else 0.0
    i = np.unravel_index(np.argmax(vals), vals.shape) if vals.size else (0, 0)
    xs = mesh.nodes[act][mask]
    return ClassCertificate(
        claim="subsolution",
        passed=worst <= tol,
        worst_value=worst,
        worst_point=(float(xs[i[1]]), float(traj.times[1:-1][keep][i[0]])) if vals.size else (),
        grid_size=int(vals.size),
        params={"alpha": alpha, "tol": tol, "pde_residual": res},
    )
