"""Degenerate coefficient families ``a(x, t) = m(t) * C0 * d(x)**gamma``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DIVERGENCE = "divergence"
NONDIVERGENCE = "nondivergence"

REL_SLACK = 1e-12


@dataclass(frozen=True)
class Modulation:
    """Bounded C1 time profile with values in ``[m_lo, m_hi]``."""

    kind: str = "constant"
    m_lo: float = 1.0
    m_hi: float = 1.0
    period: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "cosine"):
            raise ValueError(f"unknown modulation {self.kind!r}")
        if self.kind == "constant" and self.m_lo != self.m_hi:
            raise ValueError("constant modulation needs m_lo == m_hi")
        if not 0 < self.m_lo <= self.m_hi:
            raise ValueError("modulation needs 0 < m_lo <= m_hi")
        if self.period <= 0:
            raise ValueError("modulation period must be positive")

    @classmethod
    def constant(cls, value=1.0):
        return cls("constant", value, value)

    @classmethod
    def cosine(cls, m_lo, m_hi, period=1.0):
        return cls("cosine", float(m_lo), float(m_hi), float(period))

    @classmethod
    def parse(cls, text):
        """Parse ``constant``, ``constant(2)`` or ``cosine(lo, hi[, period])``."""
        text = text.strip().replace(" ", "")
        name, _, rest = text.partition("(")
        args = [float(v) for v in rest.rstrip(")").split(",") if v] if rest else []
        if name == "constant":
            return cls.constant(*args) if args else cls.constant()
        if name == "cosine":
            if len(args) not in (2, 3):
                raise ValueError("cosine modulation takes (m_lo, m_hi[, period])")
            return cls.cosine(*args)
        raise ValueError(f"unknown modulation {text!r}")

    def __call__(self, t):
        if self.kind == "constant":
            return self.m_lo + 0.0 * np.asarray(t, dtype=float)
        mid = 0.5 * (self.m_lo + self.m_hi)
        amp = 0.5 * (self.m_hi - self.m_lo)
        return mid + amp * np.cos(2.0 * math.pi * np.asarray(t, dtype=float) / self.period)

    def describe(self):
        if self.kind == "constant":
            return f"constant({self.m_lo:g})"
        return f"cosine({self.m_lo:g},{self.m_hi:g},{self.period:g})"


@dataclass(frozen=True)
class DegenerateCoefficient:
    """Coefficient vanishing like a power of the boundary distance.

    ``upper_exponent_s`` lowers the realised exponent to ``gamma - s`` so that
    ``m_lo*C0*d**gamma <= a <= m_hi*C0*d**(gamma - s)`` on ``d <= 1``; this is
    the two-sided envelope used by the nonuniqueness construction.
    """

    gamma: float
    C0: float = 1.0
    modulation: Modulation = field(default_factory=Modulation)
    form: str = DIVERGENCE
    upper_exponent_s: float = 0.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.C0 <= 0:
            raise ValueError("C0 must be positive")
        if self.form not in (DIVERGENCE, NONDIVERGENCE):
            raise ValueError(f"unknown form {self.form!r}")
        s = self.upper_exponent_s
        if s < 0 or (s > 0 and s >= self.gamma):
            raise ValueError("upper_exponent_s must lie in [0, gamma)")

    @property
    def exponent(self):
        """Exponent actually realised by ``a``."""
        return self.gamma - self.upper_exponent_s

    def spatial(self, d):
        """``C0 * d**exponent`` (the modulation-free profile)."""
        d = np.asarray(d, dtype=float)
        if self.exponent == 0:
            return self.C0 * np.ones_like(d)
        return self.C0 * d**self.exponent

    def spatial_derivative(self, d):
        """Derivative of :meth:`spatial` with respect to ``d``."""
        d = np.asarray(d, dtype=float)
        p = self.exponent
        if p == 0:
            return np.zeros_like(d)
        if p < 1 and np.any(d == 0):
            raise ValueError("gradient of a is infinite on the boundary for exponent < 1")
        return self.C0 * p * d ** (p - 1)

    def eval_a(self, geom, x, t):
        scalar = np.ndim(x) == 0 and np.ndim(t) == 0
        a = self.modulation(t) * self.spatial(geom.distance(x))
        return float(a) if scalar else a

    def eval_grad_a(self, geom, x, t):
        scalar = np.ndim(x) == 0 and np.ndim(t) == 0
        d = geom.distance(x)
        if self.exponent == 0:
            g = np.zeros(np.broadcast(np.asarray(x), np.asarray(t)).shape)
        else:
            g = self.modulation(t) * self.spatial_derivative(d) * geom.grad_distance(x)
        return float(g) if scalar else g

    def envelope_constants(self):
        """Analytic ``(c_tilde0, c0, c1)`` for the two-sided power envelope."""
        m = self.modulation
        return m.m_lo * self.C0, m.m_hi * self.C0, m.m_hi * self.C0 * self.exponent

    def certify_a3(self, geom, xs, ts):
        """Check the envelope and gradient bounds on every ``(x, t)`` sample.

        Returns ``(c_tilde0, c0, c1, passed)``.  Ridge points are skipped for
        the gradient bound only.
        """
        ct0, c0, c1 = self.envelope_constants()
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if xs.size == 0 or ts.size == 0:
            return ct0, c0, c1, True
        X, Tm = np.meshgrid(xs, ts, indexing="ij")
        p = self.exponent
        d = geom.distance(X)
        a = self.eval_a(geom, X, Tm)
        dp = d**p
        ok = np.all(a >= 0)
        ok &= np.all(a >= ct0 * dp * (1 - REL_SLACK) - REL_SLACK)
        ok &= np.all(a <= c0 * dp * (1 + REL_SLACK) + REL_SLACK)
        smooth = (X != geom.ridge) & (d > 0)
        if np.any(smooth) and p > 0:
            ga = self.eval_grad_a(geom, X[smooth], Tm[smooth])
            bound = c1 * d[smooth] ** (p - 1)
            ok &= np.all(np.abs(ga) <= bound * (1 + REL_SLACK) + REL_SLACK)
        return ct0, c0, c1, bool(ok)

    def nonuniqueness_envelope(self):
        """``(c2, c3)`` with ``c2 d**gamma <= a <= c3 d**(gamma - s)`` for ``d <= 1``."""
        m = self.modulation
        return m.m_lo * self.C0, m.m_hi * self.C0

    def to_config(self):
        return {
            "gamma": self.gamma,
            "C0": self.C0,
            "modulation": self.modulation.describe(),
            "form": self.form,
            "upper_exponent_s": self.upper_exponent_s,
        }
