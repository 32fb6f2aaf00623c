"""Numerical experiments built from the solver, the barriers and the weighted norms.

Verdicts are numerical evidence for or against uniqueness at desk scale,
not proofs.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from dul.barriers import (
    SubcriticalBarrier,
    cutoff_bound_constant,
    select_params,
)
from dul.certificate import SCHEMA_VERSION, dumps
from dul.coefficients import DIVERGENCE, NONDIVERGENCE, DegenerateCoefficient, Modulation
from dul.solver import BoundaryTreatment, ProblemSpec, build_mesh, residual, solve
from dul.weighted_norms import (
    SampledField,
    check_shell_class,
    iteration_terms,
    slice_integral,
    telescoping_schedule,
)

UNIQUE = "unique_trend"
NONUNIQUE = "nonunique_trend"
INCONCLUSIVE = "inconclusive"

DEFAULT_SWEEP = (0.2, 0.1, 0.05, 0.025)
DEFAULT_T = {DIVERGENCE: 0.5, NONDIVERGENCE: 2.0}
UNIQUE_RATIO = 0.2
NONUNIQUE_RATIO = 0.8
ZERO_GAP = 1e-14
REFINE_TOL = 0.1
SEPARATION_MIN = 1e-3
RESIDUAL_TOL = 1e-3
TAIL_TOL = 0.05


@dataclass(frozen=True)
class Discretization:
    n_nodes: int = 256
    grading: float = 2.0
    steps: int = 2048
    theta_scheme: float = 1.0
    start_steps: int = 0

    def refined(self):
        return Discretization(2 * self.n_nodes, self.grading, 2 * self.steps, self.theta_scheme,
                              2 * self.start_steps)

    def run(self, spec, mesh):
        return solve(spec, mesh, dt=spec.T / self.steps, theta_scheme=self.theta_scheme,
                     start_steps=self.start_steps)


# Crank-Nicolson with a short implicit start: second order in time away from
# the initial layer, which the residual checks need.
SMOOTH = Discretization(theta_scheme=0.5, start_steps=4)


def _map(pmap, fn, items):
    return list((pmap or map)(fn, items))


def verdict_for(gaps):
    """Trend rule on gaps ordered from the largest to the smallest eps."""
    gaps = [float(g) for g in gaps]
    first, last = gaps[0], gaps[-1]
    if max(gaps) <= ZERO_GAP:
        return UNIQUE
    monotone = all(b <= a + ZERO_GAP for a, b in zip(gaps, gaps[1:]))
    if last < UNIQUE_RATIO * first and monotone:
        return UNIQUE
    if last > NONUNIQUE_RATIO * first:
        return NONUNIQUE
    return INCONCLUSIVE


@dataclass
class DichotomyReport:
    """Gap between two clamped solutions as the clamp level shrinks."""

    gamma: float
    form: str
    T: float
    eps_sweep: list
    gaps: list
    verdict: str
    eps_ref: float
    refined_gaps: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    @property
    def gap_ratio(self):
        return self.gaps[-1] / self.gaps[0] if self.gaps[0] > 0 else 0.0

    @property
    def refinement_change(self):
        """Largest relative change of a gap under one mesh/time refinement."""
        if not self.refined_gaps:
            return None
        rel = [abs(b - a) / a if a > ZERO_GAP else abs(b - a) for a, b in zip(self.gaps, self.refined_gaps)]
        return max(rel)

    @property
    def refined_verdict(self):
        return verdict_for(self.refined_gaps) if self.refined_gaps else None

    @property
    def stable(self):
        if not self.refined_gaps:
            return None
        return self.refinement_change < REFINE_TOL and self.refined_verdict == self.verdict

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "gamma": self.gamma,
            "form": self.form,
            "T": self.T,
            "eps_ref": self.eps_ref,
            "eps": list(self.eps_sweep),
            "gap": list(self.gaps),
            "gap_ratio": self.gap_ratio,
            "verdict": self.verdict,
            "refined_gap": list(self.refined_gaps),
            "refinement_change": self.refinement_change,
            "stable": self.stable,
            "data": self.data,
        }

    def to_json(self):
        return dumps(self.to_dict())

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["eps", "gap", "refined_gap"])
        refined = self.refined_gaps or [""] * len(self.gaps)
        for e, g, r in zip(self.eps_sweep, self.gaps, refined):
            writer.writerow([repr(float(e)), repr(float(g)), "" if r == "" else repr(float(r))])
        return buf.getvalue()


def _coefficient(gamma, form, C0=1.0, modulation=None, upper_exponent_s=0.0):
    return DegenerateCoefficient(float(gamma), C0, modulation or Modulation.constant(), form, upper_exponent_s)


def clamped_pair(coef, geom, g_pair, eps, T, disc=Discretization(), u0=0.0, pmap=None):
    """Solve with ``clamp_at_eps(eps, g)`` for both values of ``g_pair``."""
    mesh = build_mesh(geom, disc.n_nodes, disc.grading)

    def run(g):
        spec = ProblemSpec(coef, T, initial=u0, treatment=BoundaryTreatment.clamp(eps, g, g))
        return disc.run(spec, mesh)

    a, b = _map(pmap, run, list(g_pair))
    return mesh, a, b


def _gaps(coef, geom, g_pair, sweep, T, disc, u0, pmap):
    eps_ref = max(sweep)
    mesh = build_mesh(geom, disc.n_nodes, disc.grading)
    core = mesh.distance > eps_ref
    weights = mesh.measure_weights

    def gap(eps):
        _, a, b = clamped_pair(coef, geom, g_pair, eps, T, disc, u0)
        diff = np.abs(a.values[-1] - b.values[-1])
        return float(np.sum(diff[core] * weights[core]))

    return _map(pmap, gap, list(sweep))


def uniqueness_probe(gamma, geom, g_pair=(0.0, 1.0), eps_sweep=DEFAULT_SWEEP, T=0.5, form=DIVERGENCE,
                     disc=Discretization(), refine=False, u0=0.0, C0=1.0, modulation=None, pmap=None):
    """Gap ``||u_a - u_b||_{L1(Omega^{eps_ref})}`` at ``t = T`` over a shrinking clamp sweep.

    ``u_a``, ``u_b`` solve with ``clamp_at_eps(eps, g)`` for the two values
    of ``g_pair`` and ``eps_ref`` is the largest swept eps.  With ``refine``
    the sweep is repeated with mesh and time step halved.
    """
    sweep = [float(e) for e in eps_sweep]
    if not sweep:
        raise ValueError("empty eps sweep")
    if any(b >= a for a, b in zip(sweep, sweep[1:])):
        raise ValueError("eps sweep must be strictly decreasing")
    coef = _coefficient(gamma, form, C0, modulation)
    gaps = _gaps(coef, geom, g_pair, sweep, T, disc, u0, pmap)
    refined = _gaps(coef, geom, g_pair, sweep, T, disc.refined(), u0, pmap) if refine else []
    report = DichotomyReport(float(gamma), form, float(T), sweep, gaps, verdict_for(gaps), max(sweep), refined)
    report.data["discretization"] = dict(vars(disc))
    report.data["g_pair"] = list(g_pair)
    if 1 <= gamma <= 2 and form == DIVERGENCE and report.verdict == UNIQUE:
        report.data["shell_class"] = _shell_consistency(coef, geom, g_pair, sweep, T, disc, u0)
    return report


def _shell_consistency(coef, geom, g_pair, sweep, T, disc, u0):
    """Shell condition for the pair difference at the smallest clamp level."""
    mesh, a, b = clamped_pair(coef, geom, g_pair, sweep[-1], T, disc, u0)
    w = _difference_field(a, b)
    mu = 4.0 - 2.0 * coef.gamma + 0.05
    shells = [e for e in sweep if 0.5 * e > sweep[-1]] or [sweep[0]]
    rep = check_shell_class(w, mu, shells, geom, T, coef.gamma)
    return {"mu": mu, "pass": rep.passed, "fitted_C": rep.fitted_C}


def _difference_field(a, b):
    """``a - b`` on every node (clamp data included) with plain cell measures."""
    return SampledField(a.mesh.nodes, a.times, a.values - b.values, a.mesh.measure_weights,
                        faces=a.mesh.faces)


# ---------------------------------------------------------------------------
# nonuniqueness for gamma < 1


@dataclass
class NonuniquenessReport:
    gamma: float
    T: float
    separation: float
    residuals: tuple
    u_a: object = None
    u_b: object = None

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "gamma": self.gamma,
            "T": self.T,
            "separation": self.separation,
            "residuals": list(self.residuals),
        }

    def __iter__(self):
        return iter((self.u_a, self.u_b, self.residuals, self.separation))


def nonuniqueness_demo(gamma, geom, T=1.0, disc=SMOOTH, C0=1.0, upper_exponent_s=0.0,
                       modulation=None, residual_d_min=None, layer_fraction=0.05):
    """Two bounded solutions with the same data: Dirichlet values 0 and 1, ``u0 = 0``.

    For ``gamma < 1`` the coefficient lets boundary values through, so both
    trajectories solve the equation in the interior with identical initial
    data and source.  Residuals skip the initial layer ``t < layer_fraction * T``
    where the boundary value 1 meets the zero initial state.  Returns a
    report unpacking to ``(u_a, u_b, residuals, separation)``.
    """
    if not 0 <= gamma < 1:
        raise ValueError(
            "the nonuniqueness construction needs 0 <= gamma < 1; the requirement gamma >= 1 for uniqueness is optimal"
        )
    coef = _coefficient(gamma, DIVERGENCE, C0, modulation, upper_exponent_s)
    mesh = build_mesh(geom, disc.n_nodes, disc.grading)
    trajs, res = [], []
    for g in (0.0, 1.0):
        spec = ProblemSpec(coef, T, initial=0.0, treatment=BoundaryTreatment.dirichlet(g, g))
        tr = disc.run(spec, mesh)
        trajs.append(tr)
        res.append(residual(spec, mesh, tr, residual_d_min, layer_fraction * T) if tr.levels >= 3 else 0.0)
    sep = float(np.sum(np.abs(trajs[1].values[-1] - trajs[0].values[-1]) * mesh.measure_weights))
    return NonuniquenessReport(float(gamma), float(T), sep, tuple(res), trajs[0], trajs[1])


def heat_dirichlet_gap(T, C0=1.0, terms=2000):
    """L1 norm at ``T`` of the unit-interval heat solution with boundary value 1 and zero start."""
    k = np.arange(1, 2 * terms, 2)
    return float(1.0 - np.sum(8.0 / (k * math.pi) ** 2 * np.exp(-C0 * (k * math.pi) ** 2 * T)))


# ---------------------------------------------------------------------------
# divergence / non-divergence contrast


@dataclass
class ContrastRow:
    form: str
    gamma: float
    T: float
    verdict: str
    gap_ratio: float
    gaps: list


def form_threshold_contrast(geom, gammas, T=None, forms=(DIVERGENCE, NONDIVERGENCE), eps_sweep=DEFAULT_SWEEP,
                            disc=Discretization(), pmap=None):
    """Verdict table over ``gammas`` for both coefficient forms.

    ``T`` is a float or a per-form mapping; the default uses a horizon per
    form (0.5 divergence, 2.0 non-divergence) because the non-divergence
    gaps need a longer time to separate.
    """
    rows = []
    horizons = dict(DEFAULT_T)
    if isinstance(T, dict):
        horizons.update(T)
    elif T is not None:
        horizons = {f: float(T) for f in forms}
    jobs = [(form, float(g)) for form in forms for g in gammas]

    def run(job):
        form, g = job
        rep = uniqueness_probe(g, geom, eps_sweep=eps_sweep, T=horizons[form], form=form, disc=disc)
        return ContrastRow(form, g, horizons[form], rep.verdict, rep.gap_ratio, rep.gaps)

    rows = _map(pmap, run, jobs)
    return rows


def flip_location(rows, form):
    """``(gamma_lo, gamma_hi)`` bracketing the first switch from nonunique to unique, else None."""
    sel = sorted((r for r in rows if r.form == form), key=lambda r: r.gamma)
    for a, b in zip(sel, sel[1:]):
        if a.verdict == NONUNIQUE and b.verdict == UNIQUE:
            return a.gamma, b.gamma
    return None


def contrast_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["form", "gamma", "T", "verdict", "gap_ratio"])
    for r in rows:
        writer.writerow([r.form, repr(r.gamma), repr(r.T), r.verdict, repr(float(r.gap_ratio))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# iteration replay


@dataclass
class ReplayReport:
    gamma: float
    mu1: float
    mu2: float
    eps: float
    tau: float
    c_cap: float
    C_hat: float
    k0: int
    rungs_holding: int
    tail_bound: float
    majorant_bound: float
    final_bound: float
    measured: float
    data: dict = field(default_factory=dict)
    rows: list = field(default_factory=list, repr=False)

    @property
    def fraction(self):
        return self.rungs_holding / self.k0 if self.k0 else 1.0

    @property
    def all_hold(self):
        return self.rungs_holding == self.k0

    @property
    def tail_match(self):
        """Relative mismatch between the computed tail and ``S eps**mu2``."""
        if self.majorant_bound == 0:
            return 0.0
        return abs(self.tail_bound - self.majorant_bound) / self.majorant_bound

    def to_dict(self):
        out = {k: v for k, v in vars(self).items() if k not in ("data", "rows")}
        out.update(schema_version=SCHEMA_VERSION, fraction=self.fraction, all_hold=self.all_hold,
                   tail_match=self.tail_match, data=self.data)
        return out


def iteration_replay(gamma, geom, T, theta_or_mu, w=None, eps=0.2, tau=None, max_rungs=20_000,
                     probe_eps=0.025, disc=Discretization(), n_space=None):
    """Replay the telescoping iteration on a computed pair difference.

    ``w`` defaults to the difference of the clamped pair (data 0 and 1) at
    ``probe_eps``.  The rung inequality

        int_{Omega^{eps_k}} |w(tau_k)| <= int_{Omega^{eps_k/2}} |w(tau_k - delta_k)| + C_hat eps_k**mu

    is checked at every rung.  For ``gamma > 2`` the step cap is the constant
    from the supercritical parameter rules, ``mu = gamma - 2`` and
    ``C_hat = C1 * ||w||_{L1(Q_T)}``; for ``1 <= gamma <= 2`` the cap is
    ``c eps_k**mu1`` with ``mu1 = 4 - 2 gamma``, ``mu = theta_or_mu`` and
    ``C_hat = C1 * C_shell`` from the shell condition of ``w``.  ``tau``
    defaults to what ``max_rungs`` rungs can telescope, capped at ``T/2``.
    """
    coef = _coefficient(gamma, DIVERGENCE)
    if gamma > 2:
        mu2 = gamma - 2.0
        mu1 = 0.5 * mu2
    elif 1 <= gamma <= 2:
        mu1 = 4.0 - 2.0 * gamma
        mu2 = float(theta_or_mu)
        if not mu2 > mu1:
            raise ValueError(f"mu={mu2} must exceed -2*gamma+4={mu1}")
    else:
        raise ValueError("iteration replay needs gamma >= 1")
    if w is None:
        _, a, b = clamped_pair(coef, geom, (0.0, 1.0), probe_eps, T, disc)
        w = _difference_field(a, b)
    theta = float(theta_or_mu) if gamma > 2 else 1.0
    barrier = select_params(coef, geom, eps, tau=min(T, 1.0) if tau is None else tau, theta=theta)
    c_cap = barrier.time_cap()
    if gamma > 2:
        k_reach = max_rungs * c_cap
    else:
        k_reach = c_cap * eps**mu1 * _harmonic(max_rungs)
    # stay just inside the rung cap so rounding cannot push the count over it
    tau = min(0.5 * T, 0.999 * k_reach) if tau is None else float(tau)
    if not 0 < tau < T:
        raise ValueError("tau must lie in (0, T)")
    sched = telescoping_schedule(eps, mu1, mu2, tau, c_cap, constant_cap=gamma > 2, max_rungs=max_rungs)

    if gamma > 2:
        C1 = cutoff_bound_constant(coef, geom, pointwise=False)
        C_hat = C1 * _l1(w, geom, T)
    else:
        C1 = cutoff_bound_constant(coef, geom, pointwise=True)
        shells = [e for e in DEFAULT_SWEEP if e < geom.eps0]
        rep = check_shell_class(w, mu2, shells, geom, T, gamma)
        C_hat = C1 * rep.fitted_C
    holding = 0
    worst = -math.inf
    rows = []
    kw = {} if n_space is None else {"n_space": n_space}
    for k, (e_k, d_k, t_k) in enumerate(sched.rungs(), 1):
        terms = iteration_terms(w, e_k, d_k, t_k, mu2, C_hat, geom, **kw)
        holding += terms.holds
        worst = max(worst, terms.lhs - terms.rhs)
        rows.append((k, e_k, d_k, t_k, terms.lhs, terms.rhs_integral, terms.rhs, terms.holds))
    tail = sched.tail_bound
    majorant = sched.partial_majorant * eps**mu2
    measured = slice_integral(w, geom, eps, tau, **kw)
    return ReplayReport(
        gamma=float(gamma), mu1=mu1, mu2=mu2, eps=float(eps), tau=float(tau), c_cap=float(c_cap),
        C_hat=float(C_hat), k0=sched.k0, rungs_holding=int(holding), tail_bound=tail,
        majorant_bound=majorant, final_bound=C_hat * tail, measured=measured,
        data={"worst_margin": worst, "full_zeta": sched.majorant, "barrier": barrier.params(),
              "subcritical": isinstance(barrier, SubcriticalBarrier)},
        rows=rows,
    )


def replay_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "eps_k", "delta_k", "tau_k", "lhs", "rhs_integral", "rhs", "holds"])
    for k, e, d, t, lhs, ri, rhs, ok in report.rows:
        writer.writerow([k, repr(e), repr(d), repr(t), repr(lhs), repr(ri), repr(rhs), int(ok)])
    return buf.getvalue()


def _harmonic(k):
    return float(np.sum(1.0 / np.arange(1, k + 1)))


def _l1(w, geom, T):
    from dul.weighted_norms import band_integral

    return band_integral(w, geom, 0.0, geom.half_width, T)


# ---------------------------------------------------------------------------
# existence bound


@dataclass
class ExistenceReport:
    gamma: float
    beta: float
    tau_w: float
    T_run: float
    lam: float
    C_hat: float
    C_hat_refined: float
    stable: bool

    def to_dict(self):
        out = dict(vars(self))
        out["schema_version"] = SCHEMA_VERSION
        return out


def _envelope_ratio(tr, mesh, beta, tau_w, lam):
    d = mesh.distance
    t = tr.times[:, None]
    log_env = d[None, :] ** beta / (tau_w - lam * t)
    return float(np.max(tr.values / np.exp(log_env)))


def existence_bound_check(gamma, beta, tau_w, T_run, geom, disc=Discretization(), rel_tol=0.25):
    """Fit ``u <= C exp(d**beta / (tau_w - lam t))`` for the flux-none solve from ``u0 = exp(d**beta/tau_w)``.

    ``lam = tau_w / (2 T_run)`` so that ``T_run = tau_w / (2 lam)``; ``C`` is
    the smallest constant on the grid, and the fit is stable when it moves
    by less than ``rel_tol`` under one refinement.
    """
    if not gamma > 2:
        raise ValueError("the existence bound applies for gamma > 2")
    if not 0 < beta <= gamma - 2:
        raise ValueError(f"beta must lie in (0, gamma-2] = (0, {gamma - 2}]")
    if not (tau_w > 0 and T_run > 0):
        raise ValueError("tau_w and T_run must be positive")
    coef = _coefficient(gamma, DIVERGENCE)
    lam = tau_w / (2.0 * T_run)
    fits = []
    for dz in (disc, disc.refined()):
        mesh = build_mesh(geom, dz.n_nodes, dz.grading)
        spec = ProblemSpec(coef, T_run, initial=lambda x: np.exp(geom.distance(x) ** beta / tau_w),
                           treatment=BoundaryTreatment.flux_none())
        tr = dz.run(spec, mesh)
        fits.append(_envelope_ratio(tr, mesh, beta, tau_w, lam))
    stable = abs(fits[1] - fits[0]) < rel_tol * fits[0]
    return ExistenceReport(float(gamma), float(beta), float(tau_w), float(T_run), lam, fits[0], fits[1], bool(stable))
