"""Weighted Lebesgue integrals, uniqueness-class checks and the telescoping schedule.

Space-time fields are accepted in two forms:

* a callable ``u(x, t)`` broadcasting over numpy arrays, integrated with
  composite two-point Gauss rules on a graded mesh in ``d`` and the
  trapezoid rule in time;
* a :class:`SampledField` (values on solver nodes at time levels), integrated
  with the cell rule of its mesh.

Regions are distance bands ``{d_lo < d < d_hi}``: ``Omega^eps`` is
``(eps, half_width)`` and the cutoff shell is ``(eps/2, 2 eps/3)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional

import mpmath
import numpy as np

from dul.certificate import SCHEMA_VERSION, dumps

N_SPACE = 2048
N_TIME = 65
GRADING = 2.0
STABILITY_FACTOR = 1.1
SLACK = 1e-9
MAX_RUNGS = 10**6

_GAUSS = np.array([-1.0, 1.0]) / math.sqrt(3.0)


class NonFiniteSample(FloatingPointError):
    """A field or weight evaluated to NaN/inf at a quadrature node."""


class ScheduleTooLong(RuntimeError):
    """The telescoping schedule needs more rungs than the iteration cap."""


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightFunction:
    """Weight ``phi(d)``: ``exp(-theta d**(2-gamma))``, ``d**exponent`` or 1."""

    kind: str = "constant"
    theta: float = 0.0
    gamma: float = 0.0
    exponent: float = 0.0

    def __post_init__(self):
        if self.kind == "exp_inverse_power":
            if not (self.theta > 0 and self.gamma > 2):
                raise ValueError("exp_inverse_power weight needs theta > 0 and gamma > 2")
        elif self.kind not in ("power", "constant"):
            raise ValueError(f"unknown weight kind {self.kind!r}")

    @classmethod
    def exp_inverse_power(cls, theta, gamma):
        return cls("exp_inverse_power", theta=float(theta), gamma=float(gamma))

    @classmethod
    def power(cls, exponent):
        return cls("power", exponent=float(exponent))

    @classmethod
    def constant(cls):
        return cls()

    def log(self, d):
        d = np.asarray(d, dtype=float)
        if self.kind == "exp_inverse_power":
            return -self.theta * d ** (2.0 - self.gamma)
        if self.kind == "power":
            return self.exponent * np.log(d)
        return np.zeros_like(d)

    def __call__(self, d):
        return np.exp(self.log(d))


# ---------------------------------------------------------------------------
# fields and quadrature


@dataclass(frozen=True)
class SampledField:
    """Field values on fixed nodes at a sequence of time levels.

    ``volumes`` are the cell measures (n-dimensional for the disk) attached
    to each node; ``values`` has shape ``(levels, nodes)``.  Optional
    ``faces`` (one more than the nodes) bound the cells, so that region
    integrals clip cells at the region edge instead of counting whole cells.
    """

    nodes: np.ndarray
    times: np.ndarray
    values: np.ndarray
    volumes: np.ndarray
    faces: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.times), len(self.nodes)) or len(self.volumes) != len(self.nodes):
            raise ValueError("sampled field shapes are inconsistent")
        if self.faces is not None and len(self.faces) != len(self.nodes) + 1:
            raise ValueError("faces must have one more entry than nodes")

    def clipped_volumes(self, geom, d_lo):
        """Cell measures inside ``{d > d_lo}`` (whole cells by node when no faces)."""
        if self.faces is None:
            return np.where(geom.distance(np.asarray(self.nodes, dtype=float)) > d_lo, self.volumes, 0.0)
        f = np.asarray(self.faces, dtype=float)
        if geom.kind == "interval":
            lo, hi = geom.x_lo + d_lo, geom.x_hi - d_lo
            return np.clip(np.minimum(f[1:], hi) - np.maximum(f[:-1], lo), 0.0, None)
        top = geom.R - d_lo
        g = np.minimum(f, max(top, 0.0)) ** geom.n / geom.n
        return np.diff(g) * geom.sphere_area()

    def at(self, t):
        """Values at time ``t`` by linear interpolation between levels."""
        times = np.asarray(self.times, dtype=float)
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise ValueError(f"t={t} outside the sampled window [{times[0]}, {times[-1]}]")
        j = int(np.clip(np.searchsorted(times, t), 1, len(times) - 1))
        t0, t1 = times[j - 1], times[j]
        lam = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        lam = min(max(lam, 0.0), 1.0)
        return (1.0 - lam) * self.values[j - 1] + lam * self.values[j]


def band_rule(geom, d_lo, d_hi, n=N_SPACE, grading=GRADING):
    """Nodes and weights for ``int_{d_lo < d < d_hi} g dx`` (n-volume for the disk).

    Composite two-point Gauss on ``d = d_lo + (d_hi - d_lo) xi**grading``,
    which clusters nodes at ``d_lo`` and integrates ``(d - d_lo)**(-1/2)``
    singularities exactly for ``grading = 2``.
    """
    if not d_hi > d_lo >= 0:
        raise ValueError(f"empty distance band ({d_lo}, {d_hi})")
    edges = np.linspace(0.0, 1.0, n + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    xi = (mid[:, None] + half[:, None] * _GAUSS[None, :]).ravel()
    wxi = np.repeat(half, 2)
    span = d_hi - d_lo
    d = d_lo + span * xi**grading
    wd = wxi * span * grading * xi ** (grading - 1.0)
    d = np.minimum(d, np.nextafter(geom.half_width, 0.0))
    x, _ = geom.points_at_distance(d)
    w = np.tile(wd, x.size // d.size) * geom.volume_density(x)
    return x, w


def time_rule(T, n=N_TIME):
    if not T > 0:
        raise ValueError("horizon T must be positive")
    t = np.linspace(0.0, T, n)
    w = np.full(n, T / (n - 1))
    w[[0, -1]] *= 0.5
    return t, w


def _check_finite(vals, x, t):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        i = np.argwhere(bad)[0]
        xv = float(np.broadcast_to(x, vals.shape)[tuple(i)])
        tv = float(np.broadcast_to(t, vals.shape)[tuple(i)])
        raise NonFiniteSample(f"non-finite sample at x={xv:.6g}, t={tv:.6g}")


def _logsumexp(logs, weights):
    logs = np.asarray(logs, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    keep = (weights > 0) & np.isfinite(logs)
    if not np.any(keep):
        return -math.inf
    z = logs[keep] + np.log(weights[keep])
    top = z.max()
    return float(top + math.log(np.exp(z - top).sum()))


def log_band_integral(u, geom, d_lo, d_hi, T, log_weight=None, p=1.0, log_field=False,
                      n_space=N_SPACE, n_time=N_TIME, grading=GRADING):
    """``log int_0^T int_band |u|**p w`` with everything kept in log space.

    ``u`` is a callable (``log|u|`` when ``log_field``) or a SampledField.
    """
    if isinstance(u, SampledField):
        x = np.asarray(u.nodes, dtype=float)
        d = geom.distance(x)
        mask = (d > d_lo) & (d < d_hi)
        times = np.asarray(u.times, dtype=float)
        keep = times <= T + 1e-12
        t = times[keep]
        if t.size < 2:
            raise ValueError("sampled field needs at least two levels in [0, T]")
        wt = np.zeros(t.size)
        dt = np.diff(t)
        wt[:-1] += 0.5 * dt
        wt[1:] += 0.5 * dt
        vals = np.asarray(u.values, dtype=float)[keep][:, mask]
        _check_finite(vals, x[mask][None, :], t[:, None])
        with np.errstate(divide="ignore"):
            logs = p * np.log(np.abs(vals))
        if log_weight is not None:
            logs = logs + log_weight(d[mask])[None, :]
        w = wt[:, None] * np.asarray(u.volumes, dtype=float)[mask][None, :]
        return _logsumexp(logs, w)
    x, wx = band_rule(geom, d_lo, d_hi, n_space, grading)
    t, wt = time_rule(T, n_time)
    raw = u(x[:, None], t[None, :])
    raw = np.broadcast_to(np.asarray(raw, dtype=float), (x.size, t.size))
    _check_finite(raw, x[:, None], t[None, :])
    if log_field:
        logs = p * raw
    else:
        with np.errstate(divide="ignore"):
            logs = p * np.log(np.abs(raw))
    if log_weight is not None:
        lw = log_weight(geom.distance(x))
        _check_finite(lw, x, 0.0)
        logs = logs + lw[:, None]
    return _logsumexp(logs, wx[:, None] * wt[None, :])


def band_integral(u, geom, d_lo, d_hi, T, log_weight=None, **kw):
    return math.exp(log_band_integral(u, geom, d_lo, d_hi, T, log_weight, **kw))


def weighted_lp(u, weight, geom, T, p=1.0, **kw):
    """``(int_0^T int_Omega |u|**p phi)**(1/p)``; ``p=2`` is kept for comparisons only."""
    weight = weight or WeightFunction.constant()
    val = band_integral(u, geom, 0.0, geom.half_width, T, weight.log, p=p, **kw)
    return val ** (1.0 / p)


def weighted_l1(u, weight, geom, T, **kw):
    """``int_0^T int_Omega |u| phi dx dt`` over the whole domain."""
    return weighted_lp(u, weight, geom, T, 1.0, **kw)


def slice_integral(u, geom, d_lo, t, n_space=N_SPACE):
    """``int_{d > d_lo} |u(x, t)| dx`` at a single time."""
    if isinstance(u, SampledField):
        x = np.asarray(u.nodes, dtype=float)
        vol = u.clipped_volumes(geom, d_lo)
        mask = vol > 0
        vals = u.at(t)[mask]
        _check_finite(vals, x[mask], t)
        return float(np.sum(np.abs(vals) * vol[mask]))
    x, w = band_rule(geom, d_lo, geom.half_width, n_space)
    vals = np.broadcast_to(np.asarray(u(x, t), dtype=float), x.shape)
    _check_finite(vals, x, t)
    return float(np.sum(np.abs(vals) * w))


# ---------------------------------------------------------------------------
# growth reports


@dataclass
class GrowthReport:
    """Sweep of a growth condition ``lhs(eps) <= C * bound(eps)``.

    ``fitted_C`` is the largest ratio over the sweep and ``passed`` records
    whether that fit is stable as ``eps`` decreases.
    """

    condition: str
    eps_values: list
    lhs_values: list
    bound_values: list
    fitted_C: float
    passed: bool
    exponent_used: float
    data: dict = field(default_factory=dict)

    def __bool__(self):
        return bool(self.passed)

    @property
    def ratios(self):
        return [_ratio(a, b) for a, b in zip(self.lhs_values, self.bound_values)]

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "condition": self.condition,
            "pass": bool(self.passed),
            "fitted_C": self.fitted_C,
            "exponent_used": self.exponent_used,
            "eps": list(self.eps_values),
            "lhs": list(self.lhs_values),
            "bound": list(self.bound_values),
            "data": self.data,
        }

    def to_json(self):
        return dumps(self.to_dict())

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["eps", "lhs", "bound"])
        for row in zip(self.eps_values, self.lhs_values, self.bound_values):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def _ratio(a, b):
    if a == 0:
        return 0.0
    return a / b if b > 0 else math.inf


def sweep_is_stable(eps_values, ratios):
    """Max ratio over the smaller-eps half stays within 10% of the larger-eps half."""
    order = np.argsort(eps_values)
    r = np.asarray(ratios, dtype=float)[order]
    half = len(r) // 2
    if half == 0:
        return bool(np.isfinite(r).all())
    low, high = r[:half].max(), r[half:].max()
    if not np.isfinite(low):
        return False
    return bool(low <= STABILITY_FACTOR * high)


def _eps_sweep(eps_sweep, geom):
    eps = [float(e) for e in eps_sweep]
    if not eps:
        raise ValueError("empty eps sweep")
    for e in eps:
        if not 0 < e < geom.half_width:
            raise ValueError(f"eps={e} outside (0, half_width)")
    return eps


def check_supercritical_class(u, theta, eps_sweep, geom, T, gamma, log_field=False, **kw):
    """Exponential growth condition ``int_0^T int_{Omega^eps} |u| <= C exp(theta eps**(2-gamma))``.

    Ratios are formed in log space so fields like ``exp(d**-3)`` stay finite
    when passed with ``log_field=True``.
    """
    if not gamma > 2:
        raise ValueError("the exponential class applies for gamma > 2")
    if not theta > 0:
        raise ValueError("theta must be positive")
    eps = _eps_sweep(eps_sweep, geom)
    log_lhs = [log_band_integral(u, geom, e, geom.half_width, T, log_field=log_field, **kw) for e in eps]
    log_bound = [theta * e ** (2.0 - gamma) for e in eps]
    log_ratio = [a - b for a, b in zip(log_lhs, log_bound)]
    finite = [r for r in log_ratio if r > -math.inf]
    ratios = [_safe_exp(r) if r > -math.inf else 0.0 for r in log_ratio]
    stable = sweep_is_stable(eps, log_ratio_to_scale(log_ratio)) if finite else True
    return GrowthReport(
        condition="exponential",
        eps_values=eps,
        lhs_values=[_safe_exp(v) for v in log_lhs],
        bound_values=[_safe_exp(v) for v in log_bound],
        fitted_C=max(ratios),
        passed=stable,
        exponent_used=float(theta),
        data={"log_lhs": log_lhs, "log_bound": log_bound, "log_ratio": log_ratio, "gamma": gamma},
    )


def log_ratio_to_scale(log_ratio):
    """Map log ratios to ratios relative to their maximum (overflow safe)."""
    top = max(log_ratio)
    return [math.exp(r - top) if r > -math.inf else 0.0 for r in log_ratio]


def _safe_exp(v):
    return math.exp(v) if v < 709.0 else math.inf


def check_shell_class(u, mu, eps_sweep, geom, T, gamma, **kw):
    """Shell condition ``int_0^T int_shell |u| d**(gamma-2) <= C eps**mu``."""
    if not 1 <= gamma <= 2:
        raise ValueError("the shell class applies for 1 <= gamma <= 2")
    if not mu > 4.0 - 2.0 * gamma:
        raise ValueError(
            f"mu={mu} must exceed -2*gamma+4={4.0 - 2.0 * gamma} for the uniqueness theorem to apply"
        )
    eps = _eps_sweep(eps_sweep, geom)
    lw = WeightFunction.power(gamma - 2.0).log
    lhs = [band_integral(u, geom, 0.5 * e, 2.0 * e / 3.0, T, lw, **kw) for e in eps]
    bound = [e**mu for e in eps]
    ratios = [_ratio(a, b) for a, b in zip(lhs, bound)]
    return GrowthReport(
        condition="shell",
        eps_values=eps,
        lhs_values=lhs,
        bound_values=bound,
        fitted_C=max(ratios),
        passed=sweep_is_stable(eps, ratios),
        exponent_used=float(mu),
        data={"gamma": gamma},
    )


class PointwiseGrowth(NamedTuple):
    holds: bool
    C_bar: float


def check_pointwise_growth(u, l, geom, T, levels=(256, 512, 1024, 2048), n_time=17, gamma=None):
    """Smallest ``C_bar`` with ``|u| <= C_bar d**-l`` on nested graded grids.

    ``holds`` is true when ``C_bar`` settles (< 10% growth over the last
    refinement).  With ``gamma`` given, ``l < 3 gamma - 5`` is also required.
    """
    if l < 0:
        raise ValueError("l must be nonnegative")
    t = np.linspace(0.0, T, n_time)
    seq = []
    for n in levels:
        x, _ = band_rule(geom, 0.0, geom.half_width, n)
        d = geom.distance(x)
        vals = np.abs(np.broadcast_to(np.asarray(u(x[:, None], t[None, :]), float), (x.size, t.size)))
        _check_finite(vals, x[:, None], t[None, :])
        seq.append(float(np.max(vals * d[:, None] ** l)))
    settled = seq[-1] <= STABILITY_FACTOR * seq[-2] if len(seq) > 1 else True
    if gamma is not None and not l < 3.0 * gamma - 5.0:
        settled = False
    return PointwiseGrowth(bool(settled), seq[-1])


# ---------------------------------------------------------------------------
# telescoping schedule


@dataclass
class Schedule:
    """Rungs ``(eps_k, delta_k, tau_k)`` of the telescoping iteration.

    ``delta`` and ``tau`` hold exact fractions so ``tau - tau_{k+1}`` equals
    the partial sum of ``delta`` with no rounding.
    """

    eps: float
    mu1: float
    mu2: float
    tau: Fraction
    c_cap: float
    eps_k: list
    delta_k: list
    tau_k: list
    k0: int
    tail_bound: float
    majorant: float
    partial_majorant: float

    def rungs(self):
        for k in range(self.k0):
            yield self.eps_k[k], float(self.delta_k[k]), float(self.tau_k[k])

    def to_rows(self):
        return [(k + 1, e, d, t) for k, (e, d, t) in enumerate(self.rungs())]


def harmonic_rungs(eps, mu1, tau, c_cap):
    """Rung count of the greedy schedule from the harmonic-sum identity.

    Since ``eps_k**mu1 = eps**mu1 / k``, the schedule ends at the smallest
    ``k`` with ``c_cap eps**mu1 H_k >= tau``.
    """
    target = mpmath.mpf(tau) / (mpmath.mpf(c_cap) * mpmath.mpf(eps) ** mpmath.mpf(mu1))
    if target <= 1:
        return 1
    # H_k - H_{k-1} = 1/k, so resolving neighbours needs about log10(k) extra digits
    with mpmath.workdps(30 + int(float(target) / math.log(10.0))):
        target = mpmath.mpf(tau) / (mpmath.mpf(c_cap) * mpmath.mpf(eps) ** mpmath.mpf(mu1))
        guess = int(mpmath.ceil(mpmath.exp(target - mpmath.euler)))
        lo, hi = 1, max(2 * guess + 2, 2)
        while mpmath.harmonic(hi) < target:
            hi *= 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if mpmath.harmonic(mid) >= target:
                hi = mid
            else:
                lo = mid
    return hi


def telescoping_schedule(eps, mu1, mu2, tau, c_cap, constant_cap=False, max_rungs=MAX_RUNGS):
    """Greedy schedule ``eps_k = eps / k**(1/mu1)``, ``delta_k = min(tau_k, c_cap eps_k**mu1)``.

    ``constant_cap`` uses ``delta_k = min(tau_k, c_cap)`` instead (the
    supercritical variant).  ``tail_bound = sum_{k <= k0} eps_k**mu2``;
    ``majorant`` is the full zeta sum ``S`` and ``partial_majorant`` its
    partial sum up to ``k0``.
    """
    if not mu2 > mu1:
        raise ValueError(f"schedule needs mu2 > mu1 (got mu1={mu1}, mu2={mu2})")
    if not (mu1 > 0 and eps > 0 and tau > 0 and c_cap > 0):
        raise ValueError("eps, mu1, tau and c_cap must be positive")
    if constant_cap:
        expected = math.ceil(tau / c_cap)
    else:
        expected = harmonic_rungs(eps, mu1, tau, c_cap)
    if expected > max_rungs:
        raise ScheduleTooLong(f"schedule needs about {expected:.3e} rungs, above the cap {max_rungs}")
    tau_f = Fraction(tau)
    eps_k, delta_k, tau_k = [], [], [tau_f]
    remaining = tau_f
    k = 0
    while remaining > 0:
        k += 1
        if k > max_rungs:
            raise ScheduleTooLong(f"schedule did not reach tau=0 within {max_rungs} rungs")
        e = eps / k ** (1.0 / mu1)
        cap = Fraction(c_cap) if constant_cap else Fraction(c_cap * e**mu1)
        d = min(remaining, cap)
        eps_k.append(e)
        delta_k.append(d)
        remaining -= d
        tau_k.append(remaining)
    k0 = k
    s = mu2 / mu1
    tail = math.fsum(e**mu2 for e in eps_k)
    return Schedule(
        eps=float(eps), mu1=float(mu1), mu2=float(mu2), tau=tau_f, c_cap=float(c_cap),
        eps_k=eps_k, delta_k=delta_k, tau_k=tau_k, k0=k0,
        tail_bound=tail,
        majorant=float(mpmath.zeta(s)),
        partial_majorant=float(mpmath.zeta(s) - mpmath.zeta(s, k0 + 1)),
    )


# ---------------------------------------------------------------------------
# iteration inequality


class RungTerms(NamedTuple):
    lhs: float
    rhs_integral: float
    rhs: float
    holds: bool


def iteration_terms(w, eps, delta, tau, mu, C_hat, geom, n_space=N_SPACE):
    """Both sides of ``int_{Omega^eps}|w(tau)| <= int_{Omega^{eps/2}}|w(tau-delta)| + C eps**mu``."""
    if tau - delta < -1e-15:
        raise ValueError(f"tau - delta = {tau - delta} is negative")
    lhs = slice_integral(w, geom, eps, tau, n_space)
    rhs_int = slice_integral(w, geom, 0.5 * eps, max(tau - delta, 0.0), n_space)
    rhs = rhs_int + C_hat * eps**mu
    scale = max(abs(lhs), abs(rhs), 1.0)
    return RungTerms(lhs, rhs_int, rhs, bool(lhs <= rhs + SLACK * scale))


def iteration_inequality_check(w, eps, delta, tau, mu, C_hat, geom, n_space=N_SPACE):
    """Whether one rung of the telescoping iteration holds (slack 1e-9 * scale)."""
    return iteration_terms(w, eps, delta, tau, mu, C_hat, geom, n_space).holds
