"""Acceptance suite: one test, and one summary line, per criterion."""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from dul.barriers import (
    constants_for,
    normal_derivative_check,
    select_params,
    verify_D1,
    verify_D2,
    verify_E1,
    window_times,
)
from dul.coefficients import DegenerateCoefficient
from dul.experiments import (
    NONUNIQUE,
    UNIQUE,
    flip_location,
    form_threshold_contrast,
    iteration_replay,
    uniqueness_probe,
)
from dul.geometry import DomainGeometry
from dul.solver import BoundaryTreatment, ProblemSpec, build_mesh, solve
from dul.weighted_norms import (
    check_pointwise_growth,
    check_shell_class,
    check_supercritical_class,
    harmonic_rungs,
    telescoping_schedule,
)

G = DomainGeometry.interval()
EPS, TAU = 0.1, 1.0
SWEEP = [0.2, 0.1, 0.05, 0.025]
CERT_TOL = 1e-10


def _barrier(gamma):
    coef = DegenerateCoefficient(gamma)
    ct0, c0, c1, ok = coef.certify_a3(G, np.linspace(0, 1, 1001), [0.0])
    k0, nu0 = G.regularity_constants(EPS)
    assert ok and tuple(constants_for(coef, G, EPS)) == (ct0, c0, c1, k0, nu0)
    return coef, select_params(coef, G, EPS, TAU)


def test_criterion_1_supercritical_certification(criterion):
    details, ok = [], True
    for gamma in (2.5, 3.0, 4.0):
        start = time.perf_counter()
        coef, b = _barrier(gamma)
        cert = verify_E1(b, coef, G, n_space=10_000, n_time=100)
        elapsed = time.perf_counter() - start
        good = b.violations() == [] and cert.passed and cert.worst_value <= CERT_TOL and elapsed < 10
        good &= cert.grid_size >= 10_000 * 100
        ok &= good
        details.append(f"gamma={gamma}: worst={cert.worst_value:.3e} t={elapsed:.2f}s")
    criterion(1, ok, "; ".join(details))
    assert ok


def test_criterion_2_subcritical_certification(criterion):
    details, ok = [], True
    for gamma in (1.0, 1.5, 2.0):
        start = time.perf_counter()
        coef, b = _barrier(gamma)
        d1 = verify_D1(b, coef, G, n_space=10_000, n_time=100)
        d2 = verify_D2(coef, G, SWEEP, n_space=10_000)
        nd = normal_derivative_check(b, G, window_times(b, 100))
        elapsed = time.perf_counter() - start
        good = d1.passed and d2.passed and nd.passed and nd.worst_value <= CERT_TOL and elapsed < 10
        good &= b.violations() == []
        ok &= good
        details.append(f"gamma={gamma}: D1={d1.worst_value:.2e} D2 ratio={d2.worst_value:.1f} "
                       f"normal={nd.worst_value:.1e} t={elapsed:.2f}s")
    criterion(2, ok, "; ".join(details))
    assert ok


def test_criterion_3_negative_controls(criterion):
    rows, ok = [], True
    for gamma in (3.0, 4.0):
        coef, b = _barrier(gamma)
        cert = verify_E1(b.with_overrides(alpha1=1.0), coef, G)
        ok &= (not cert.passed) and cert.worst_value > 0
        rows.append(f"E1 alpha1=1 gamma={gamma}: {cert.worst_value:.2e}")
    for gamma in (1.0, 1.5, 2.0):
        coef, b = _barrier(gamma)
        cert = verify_D1(b.with_overrides(delta=b.delta * 1e6), coef, G)
        ok &= (not cert.passed) and cert.worst_value > 0
        rows.append(f"D1 delta*1e6 gamma={gamma}: {cert.worst_value:.2e}")
    criterion(3, ok, "; ".join(rows))
    assert ok


def test_criterion_4_solver(criterion):
    heat = DegenerateCoefficient(0.0)

    def source(x, t):
        return (np.pi**2 - 1.0) * np.exp(-t) * np.sin(np.pi * x)

    errs = []
    for n in (32, 64, 128, 256):
        spec = ProblemSpec(heat, 0.5, initial=lambda x: np.sin(np.pi * x), source=source,
                           treatment=BoundaryTreatment.dirichlet(0.0))
        m = build_mesh(G, n)
        tr = solve(spec, m, dt=1.0 / n, theta_scheme=0.5)
        errs.append(np.max(np.abs(tr.values[-1] - np.exp(-0.5) * np.sin(np.pi * m.nodes))))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]

    m = build_mesh(G, 256)
    u0 = lambda x: 0.5 + 0.5 * np.cos(5 * np.pi * x) * (x < 0.6)
    drift, lo, hi = 0.0, math.inf, -math.inf
    for theta in (0.5, 1.0):
        tr = solve(ProblemSpec(DegenerateCoefficient(4.0), 0.5, initial=u0), m, theta_scheme=theta)
        mass = tr.values @ m.measure_weights
        drift = max(drift, float(np.max(np.abs(np.diff(mass)))))
        if theta == 1.0:
            lo, hi = tr.values.min() - u0(m.nodes).min(), tr.values.max() - u0(m.nodes).max()
    ok = min(orders) >= 1.9 and drift <= 1e-10 and lo >= -1e-12 and hi <= 1e-12
    criterion(4, ok, f"orders={[round(o, 3) for o in orders]} mass drift/step={drift:.1e} "
                     f"bounds overshoot=({lo:.1e}, {hi:.1e})")
    assert ok


def test_criterion_5_dichotomy(criterion):
    start = time.perf_counter()
    hi = uniqueness_probe(1.5, G, (0.0, 1.0), SWEEP, T=0.5, refine=True)
    lo = uniqueness_probe(0.5, G, (0.0, 1.0), SWEEP, T=0.5, refine=True)
    elapsed = time.perf_counter() - start
    ok = hi.verdict == UNIQUE and lo.verdict == NONUNIQUE and hi.stable and lo.stable and elapsed < 120
    criterion(5, ok, f"gamma=1.5 {hi.verdict} ratio={hi.gap_ratio:.3f} change={hi.refinement_change:.1e}; "
                     f"gamma=0.5 {lo.verdict} ratio={lo.gap_ratio:.3f} change={lo.refinement_change:.1e}; "
                     f"t={elapsed:.1f}s")
    assert ok


def test_criterion_6_threshold_contrast(criterion):
    rows = form_threshold_contrast(G, [0.5, 1.5, 2.5])
    div, nondiv = flip_location(rows, "divergence"), flip_location(rows, "nondivergence")
    ok = div == (0.5, 1.5) and nondiv == (1.5, 2.5)
    criterion(6, ok, f"divergence flips {div}, nondivergence flips {nondiv}")
    assert ok


def test_criterion_7_iteration_replay(criterion):
    sup = iteration_replay(4.0, G, 0.5, 1.0)
    sub = iteration_replay(1.5, G, 0.5, 1.2)
    ok = all(r.all_hold and r.tail_match < 0.05 for r in (sup, sub))
    criterion(7, ok, f"gamma=4: {sup.rungs_holding}/{sup.k0} rungs, tail mismatch {sup.tail_match:.1e}; "
                     f"gamma=1.5 mu=1.2: {sub.rungs_holding}/{sub.k0} rungs, tail mismatch {sub.tail_match:.1e}")
    assert ok


def test_criterion_8_weighted_classes(criterion):
    T = 1.0

    def one(x, t):
        return np.ones(np.broadcast(x, t).shape)

    quad_err, ok = 0.0, True
    for theta in (1e-3, 0.1, 1.0, 10.0, 100.0):
        rep = check_supercritical_class(one, theta, SWEEP, G, T, gamma=4.0)
        ok &= rep.passed and rep.fitted_C <= T * G.measure()
        quad_err = max(quad_err, max(abs(l - T * (1 - 2 * e)) for e, l in zip(SWEEP, rep.lhs_values)))

    shell = check_shell_class(lambda x, t: G.distance(x) ** -0.3 + 0 * t, 0.5, SWEEP, G, T, gamma=1.8)
    ok &= shell.passed
    exact = [2 * T * 2 * (math.sqrt(2 * e / 3) - math.sqrt(e / 2)) for e in SWEEP]
    quad_err = max(quad_err, max(abs(a - b) for a, b in zip(shell.lhs_values, exact)))

    pw = check_pointwise_growth(lambda x, t: G.distance(x) ** -0.5 + 0 * t, 0.5, G, T, gamma=1.8)
    ok &= not pw.holds
    quad_err = max(quad_err, abs(pw.C_bar - 1.0))
    ok &= quad_err <= 1e-6
    criterion(8, ok, f"exp class pass for all theta, shell fitted C={shell.fitted_C:.4f}, "
                     f"pointwise l=0.5 holds={pw.holds}; max quadrature error {quad_err:.1e}")
    assert ok


def test_criterion_9_schedule_arithmetic(criterion):
    cases = [(0.1, 1.0, 2.0, 0.05, 1.0), (0.2, 1.0, 1.2, 0.01, 0.01), (0.5, 0.5, 0.7, 0.3, 0.05),
             (0.05, 2.0, 3.0, 0.005, 1.0), (0.2, 1.0, 2.0, 0.25, 1.5625e-5)]
    rng = np.random.default_rng(2024)
    while len(cases) < 40:
        eps, mu1, tau, cap = rng.uniform(0.01, 0.5), rng.uniform(0.2, 2.0), rng.uniform(1e-3, 1.0), rng.uniform(0.1, 10)
        if harmonic_rungs(eps, mu1, tau, cap) < 5000:
            cases.append((eps, mu1, mu1 + rng.uniform(0.05, 2.0), tau, cap))
    ok, total_rungs = True, 0
    for eps, mu1, mu2, tau, cap in cases:
        const = cap < 1e-4
        s = telescoping_schedule(eps, mu1, mu2, tau, cap, constant_cap=const)
        running = Fraction(0)
        for k in range(s.k0):
            running += s.delta_k[k]
            ok &= s.tau - s.tau_k[k + 1] == running
        ok &= s.tau_k[-1] == 0
        if not const:
            ok &= s.k0 == harmonic_rungs(eps, mu1, tau, cap)
        total_rungs += s.k0
    rejected = 0
    for mu1, mu2 in ((2.0, 1.0), (1.0, 1.0)):
        with pytest.raises(ValueError):
            telescoping_schedule(0.1, mu1, mu2, 0.05, 1.0)
        rejected += 1
    ok &= rejected == 2
    criterion(9, ok, f"{len(cases)} schedules telescope exactly ({total_rungs} rungs), mu2<=mu1 rejected")
    assert ok
