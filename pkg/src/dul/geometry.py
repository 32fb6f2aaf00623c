"""Domains with a closed-form distance-to-boundary field.

Two geometries are supported: a 1-D interval and the radial reduction of an
n-ball.  For both, ``d``, ``grad d`` and ``laplacian d`` are exact, so barrier
certificates carry no geometry approximation error.

Points are plain floats or numpy arrays (the interval coordinate ``x`` or the
radius ``r``).  Vector quantities are returned as their single component along
the coordinate axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INTERVAL = "interval"
DISK_RADIAL = "disk_radial"

INNER = "inner"
SHELL = "shell"
OUTER = "outer"


class GeometryError(ValueError):
    """Point outside the closure of the domain or on a singular set."""


class NondifferentiablePoint(GeometryError):
    """Point on the ridge set where ``d`` is not differentiable."""


def _out(values, scalar):
    return float(values) if scalar else values


@dataclass(frozen=True)
class DomainGeometry:
    """Bounded domain with exact distance field.

    Use :meth:`interval` or :meth:`disk` rather than the raw constructor.
    ``k0`` and ``nu0`` are the regularity constants on the layer ``d < eps0``.
    """

    kind: str
    x_lo: float = 0.0
    x_hi: float = 1.0
    R: float = 1.0
    n: int = 2
    eps0: float = field(default=0.0)

    def __post_init__(self):
        if self.kind == INTERVAL:
            if not self.x_hi > self.x_lo:
                raise GeometryError("interval needs x_lo < x_hi")
        elif self.kind == DISK_RADIAL:
            if not self.R > 0:
                raise GeometryError("disk radius must be positive")
            if int(self.n) != self.n or self.n < 2:
                raise GeometryError("disk dimension n must be an integer >= 2")
        else:
            raise GeometryError(f"unknown geometry kind {self.kind!r}")
        if self.eps0 == 0.0:
            object.__setattr__(self, "eps0", self.default_eps0())
        if not 0.0 < self.eps0 < 1.0:
            raise GeometryError(f"eps0 must lie in (0, 1), got {self.eps0}")
        if not self.eps0 < self.half_width:
            raise GeometryError("eps0 must be smaller than the domain half-width")

    @classmethod
    def interval(cls, x_lo=0.0, x_hi=1.0, eps0=None):
        return cls(INTERVAL, x_lo=float(x_lo), x_hi=float(x_hi), eps0=float(eps0 or 0.0))

    @classmethod
    def disk(cls, R=1.0, n=2, eps0=None):
        return cls(DISK_RADIAL, R=float(R), n=int(n), eps0=float(eps0 or 0.0))

    # -- basic shape data --------------------------------------------------

    @property
    def half_width(self):
        """Largest value of ``d`` over the domain."""
        if self.kind == INTERVAL:
            return 0.5 * (self.x_hi - self.x_lo)
        return self.R

    @property
    def lower(self):
        return self.x_lo if self.kind == INTERVAL else 0.0

    @property
    def upper(self):
        return self.x_hi if self.kind == INTERVAL else self.R

    @property
    def ridge(self):
        """Coordinate of the ridge set (interval midpoint or disk centre)."""
        if self.kind == INTERVAL:
            return 0.5 * (self.x_lo + self.x_hi)
        return 0.0

    def default_eps0(self):
        if self.kind == INTERVAL:
            return min(0.49 * self.half_width, 0.99)
        return min(0.9 * self.R, 0.99)

    def measure(self):
        """Lebesgue measure of the domain (n-volume for the disk)."""
        if self.kind == INTERVAL:
            return self.x_hi - self.x_lo
        return self.sphere_area() * self.R**self.n / self.n

    def sphere_area(self):
        """Area of the unit sphere in R^n (1 for the interval)."""
        if self.kind == INTERVAL:
            return 1.0
        n = self.n
        return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)

    def volume_density(self, x):
        """Jacobian turning ``dx`` (or ``dr``) into the n-dimensional measure."""
        x = np.asarray(x, dtype=float)
        if self.kind == INTERVAL:
            return np.ones_like(x)
        return self.sphere_area() * x ** (self.n - 1)

    # -- distance field ----------------------------------------------------

    def _check_closure(self, x):
        lo, hi = self.lower, self.upper
        if np.any(~np.isfinite(x)) or np.any(x < lo) or np.any(x > hi):
            raise GeometryError(f"point outside the closed domain [{lo}, {hi}]")

    def distance(self, x):
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        self._check_closure(x)
        if self.kind == INTERVAL:
            d = np.minimum(x - self.x_lo, self.x_hi - x)
        else:
            d = self.R - x
        return _out(d, scalar)

    def _check_ridge(self, x):
        if np.any(x == self.ridge):
            raise NondifferentiablePoint(
                f"d is not differentiable at {self.ridge}; exclude the ridge from the grid"
            )

    def grad_distance(self, x):
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        self._check_closure(x)
        self._check_ridge(x)
        if self.kind == INTERVAL:
            g = np.where(x < self.ridge, 1.0, -1.0)
        else:
            g = -np.ones_like(x)
        return _out(g, scalar)

    def laplacian_distance(self, x):
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        self._check_closure(x)
        if self.kind == INTERVAL:
            self._check_ridge(x)
            lap = np.zeros_like(x)
        else:
            if np.any(x == 0.0):
                raise NondifferentiablePoint("laplacian of d is singular at the disk centre")
            lap = -(self.n - 1) / x
        return _out(lap, scalar)

    def regularity_constants(self, eps):
        """Return ``(k0, nu0)`` on the layer ``0 < d <= eps``."""
        if not 0.0 < eps < self.eps0:
            raise ValueError(f"eps must lie in (0, eps0={self.eps0}), got {eps}")
        if self.kind == INTERVAL:
            return 0.0, 1.0
        return (self.n - 1) / (self.R - eps), 1.0

    @property
    def k0(self):
        if self.kind == INTERVAL:
            return 0.0
        return (self.n - 1) / (self.R - self.eps0)

    @property
    def nu0(self):
        return 1.0

    # -- interior sets -----------------------------------------------------

    def in_interior_set(self, x, eps):
        """Membership in ``Omega^eps = {d > eps}``."""
        d = np.asarray(self.distance(x))
        out = d > eps
        return bool(out) if out.ndim == 0 else out

    def shell_membership(self, x, eps):
        """Classify against the cutoff shell ``eps/2 < d <= 2 eps/3``."""
        if eps <= 0:
            raise ValueError("eps must be positive")
        d = np.asarray(self.distance(x))
        labels = np.where(d > 2.0 * eps / 3.0, INNER, np.where(d > 0.5 * eps, SHELL, OUTER))
        return str(labels) if labels.ndim == 0 else labels

    # -- sampling helpers --------------------------------------------------

    def points_at_distance(self, d):
        """All coordinates with the given distances (both sides of an interval).

        Returns ``(x, side)`` with ``side`` 0 for the lower boundary, 1 for the
        upper one.  Distances must lie in ``[0, half_width)`` so the ridge is
        never produced.
        """
        d = np.asarray(d, dtype=float)
        if np.any(d < 0) or np.any(d >= self.half_width):
            raise GeometryError("distances must lie in [0, half_width)")
        if self.kind == INTERVAL:
            x = np.concatenate([self.x_lo + d, self.x_hi - d])
            side = np.concatenate([np.zeros(d.size, int), np.ones(d.size, int)])
            return x, side
        return self.R - d, np.ones(d.size, int)

    def to_config(self):
        if self.kind == INTERVAL:
            return {"kind": INTERVAL, "x_lo": self.x_lo, "x_hi": self.x_hi, "eps0": self.eps0}
        return {"kind": DISK_RADIAL, "R": self.R, "n": self.n, "eps0": self.eps0}
