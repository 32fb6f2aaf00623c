"""Problem specification and finite-volume assembly of the spatial operator.

On the active nodes the semi-discrete operator has the form

    L(t) u = m(t) (A u + r)

with ``A`` tridiagonal and ``r`` carrying Dirichlet data.  Interior faces use
the geometric mean of the nodal values of ``a``; Dirichlet faces use the
exact resistance ``int ds / a`` between the boundary and the first node, so
a coefficient vanishing like ``d**p`` with ``p >= 1`` blocks the boundary
data completely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from dul.coefficients import DIVERGENCE, DegenerateCoefficient
from dul.geometry import INTERVAL

FLUX_NONE = "degenerate_flux_none"
DIRICHLET = "dirichlet"
CLAMP = "clamp_at_eps"


@dataclass(frozen=True)
class BoundaryTreatment:
    """``degenerate_flux_none``, ``dirichlet(g_lo, g_hi)`` or ``clamp_at_eps(eps, g_lo, g_hi)``.

    On the disk only the outer boundary exists and ``g_hi`` is used.
    """

    kind: str = FLUX_NONE
    g_lo: float = 0.0
    g_hi: float = 0.0
    eps: float = 0.0

    def __post_init__(self):
        if self.kind not in (FLUX_NONE, DIRICHLET, CLAMP):
            raise ValueError(f"unknown boundary treatment {self.kind!r}")
        if self.kind == CLAMP and not self.eps > 0:
            raise ValueError("clamp_at_eps needs eps > 0")

    @classmethod
    def flux_none(cls):
        return cls(FLUX_NONE)

    @classmethod
    def dirichlet(cls, g_lo, g_hi=None):
        return cls(DIRICHLET, float(g_lo), float(g_lo if g_hi is None else g_hi))

    @classmethod
    def clamp(cls, eps, g_lo, g_hi=None):
        return cls(CLAMP, float(g_lo), float(g_lo if g_hi is None else g_hi), float(eps))

    def to_config(self):
        out = {"kind": self.kind}
        if self.kind != FLUX_NONE:
            out.update(g_lo=self.g_lo, g_hi=self.g_hi)
        if self.kind == CLAMP:
            out["eps"] = self.eps
        return out


def _constant(value):
    value = float(value)
    return lambda x, *rest: np.full(np.shape(x), value)


@dataclass(frozen=True)
class ProblemSpec:
    """``u_t = div(a grad u) + f`` (or ``a lap u + f``) with initial data and a treatment."""

    coefficient: DegenerateCoefficient
    T: float
    initial: Callable = field(default_factory=lambda: _constant(0.0))
    source: Optional[Callable] = None
    treatment: BoundaryTreatment = field(default_factory=BoundaryTreatment)

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if not callable(self.initial):
            object.__setattr__(self, "initial", _constant(self.initial))

    def f(self, x, t):
        shape = np.broadcast_shapes(np.shape(x), np.shape(t))
        if self.source is None:
            return np.zeros(shape)
        return np.broadcast_to(np.asarray(self.source(x, t), dtype=float), shape)


@dataclass(frozen=True, eq=False)
class Assembly:
    """Active-node operator ``m(t) (A u + r)`` plus the fill values of inactive nodes."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    r: np.ndarray
    active: np.ndarray
    fill: np.ndarray
    bnd: Optional[np.ndarray] = None

    def apply(self, u_active):
        """``A u + r`` in flux-difference form, so constants map to exactly zero."""
        u = np.asarray(u_active, dtype=float)
        out = np.zeros_like(u)
        du = np.diff(u)
        out[:-1] += self.sup[:-1] * du
        out[1:] -= self.sub[1:] * du
        if self.bnd is not None:
            out -= self.bnd * u
        return out + self.r


def _inverse_integral(p, C0, d1, d2):
    """``int_{d1}^{d2} ds / (C0 s**p)`` for ``0 <= d1 < d2``; ``inf`` when divergent."""
    if p == 0:
        return (d2 - d1) / C0
    if d1 == 0 and p >= 1:
        return math.inf
    if p == 1:
        return math.log(d2 / d1) / C0
    return (d2 ** (1.0 - p) - d1 ** (1.0 - p)) / ((1.0 - p) * C0)


def assemble(spec, mesh):
    """Tridiagonal operator on the active nodes for ``spec`` on ``mesh``."""
    coef = spec.coefficient
    tr = spec.treatment
    geom = mesh.geom
    x = mesh.nodes
    d = geom.distance(x)
    div_form = coef.form == DIVERGENCE
    n = x.size
    interval = geom.kind == INTERVAL

    if tr.kind == CLAMP:
        if not tr.eps < geom.half_width:
            raise ValueError("clamp eps must be below the domain half-width")
        active = d > tr.eps
        if active.sum() < 3:
            raise ValueError("clamp_at_eps leaves fewer than three active nodes; refine the mesh")
    else:
        active = np.ones(n, dtype=bool)
    idx = np.flatnonzero(active)
    i0, i1 = idx[0], idx[-1]
    if interval and np.any(np.diff(idx) != 1):
        raise ValueError("active region must be contiguous")

    fill = np.zeros(n)
    if tr.kind == CLAMP:
        if interval:
            fill[: i0] = tr.g_lo
            fill[i1 + 1:] = tr.g_hi
        else:
            fill[i1 + 1:] = tr.g_hi

    xa = x[active]
    da = d[active]
    m_nodes = xa.size
    # interior faces of the active block
    fpos = 0.5 * (xa[1:] + xa[:-1])
    area_in = mesh.areas(fpos)
    h = np.diff(xa)
    if div_form:
        A_nodes = coef.spatial(da)
        a_face = np.sqrt(A_nodes[1:] * A_nodes[:-1])
        cond = area_in * a_face / h
    else:
        cond = area_in / h

    # boundary faces of the active block (left, right)
    if tr.kind == CLAMP:
        if interval:
            left_pos, right_pos = geom.x_lo + tr.eps, geom.x_hi - tr.eps
        else:
            left_pos, right_pos = 0.0, geom.R - tr.eps
    else:
        left_pos, right_pos = mesh.faces[0], mesh.faces[-1]
    vol = _volumes(mesh, xa, fpos, left_pos, right_pos)

    bc = np.zeros(2)
    data = (tr.g_lo, tr.g_hi)
    if tr.kind != FLUX_NONE:
        ends = [(0, left_pos), (1, right_pos)]
        if not interval:
            ends = [(1, right_pos)]
        for side, pos in ends:
            j = 0 if side == 0 else m_nodes - 1
            d_face = geom.distance(pos)
            if div_form:
                res = _inverse_integral(coef.exponent, coef.C0, min(d_face, da[j]), max(d_face, da[j]))
            else:
                res = abs(xa[j] - pos)
            bc[side] = 0.0 if (math.isinf(res) or res == 0) else mesh.areas(np.array([pos]))[0] / res
            if res == 0:
                raise ValueError("a node lies exactly on the clamp level; shift eps or the mesh")

    sub = np.zeros(m_nodes)
    sup = np.zeros(m_nodes)
    sub[1:] = cond
    sup[:-1] = cond
    diag = -(np.concatenate([[0.0], cond]) + np.concatenate([cond, [0.0]]))
    diag[0] -= bc[0]
    diag[-1] -= bc[1]
    bnd = np.zeros(m_nodes)
    bnd[0] += bc[0]
    bnd[-1] += bc[1]
    scale = 1.0 / vol
    if not div_form:
        scale = scale * coef.spatial(da)
    bnd = bnd * scale
    r = np.zeros(m_nodes)
    r[0] += bnd[0] * data[0]
    r[-1] += bnd[-1] * data[1]
    return Assembly(sub * scale, diag * scale, sup * scale, r, active, fill, bnd)


def _volumes(mesh, xa, fpos, left_pos, right_pos):
    f = np.concatenate([[left_pos], fpos, [right_pos]])
    if mesh.geom.kind == INTERVAL:
        return np.diff(f)
    n = mesh.geom.n
    return np.diff(f**n) / n


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values of a field on the mesh nodes at one time."""

    mesh: object
    values: np.ndarray
    t: float = 0.0


def apply_operator(spec, mesh, u_level, t):
    """``div(a grad u)`` (or ``a lap u``) at time ``t`` on the active nodes.

    Inactive nodes (outside the clamp region) are returned as zero.
    """
    asm = assemble(spec, mesh)
    u = np.asarray(getattr(u_level, "values", u_level), dtype=float)
    out = np.zeros(mesh.size)
    out[asm.active] = spec.coefficient.modulation(t) * asm.apply(u[asm.active])
    return GridFunction(mesh, out, float(t))


def active_volumes(spec, mesh):
    """Cell measures of the active nodes (clamp cells end at the clamp level)."""
    asm = assemble(spec, mesh)
    x = mesh.nodes[asm.active]
    fpos = 0.5 * (x[1:] + x[:-1])
    tr = spec.treatment
    geom = mesh.geom
    if tr.kind == CLAMP:
        if geom.kind == INTERVAL:
            lp, rp = geom.x_lo + tr.eps, geom.x_hi - tr.eps
        else:
            lp, rp = 0.0, geom.R - tr.eps
    else:
        lp, rp = mesh.faces[0], mesh.faces[-1]
    return _volumes(mesh, x, fpos, lp, rp)
