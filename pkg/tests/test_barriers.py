import math

import numpy as np
import pytest

from dul.barriers import (
    Constants,
    CutoffFunction,
    InadmissibleConstants,
    Regularizer,
    SubcriticalBarrier,
    SupercriticalBarrier,
    cutoff_bound_constant,
    eval_xi,
    eval_xi_derivatives,
    eval_zeta,
    normal_derivative_check,
    select_params,
    select_subcritical_params,
    select_supercritical_params,
    smoothstep,
    verify_D1,
    verify_D2,
    verify_E1,
    verify_E2,
)
from dul.coefficients import DegenerateCoefficient
from dul.geometry import DomainGeometry

G = DomainGeometry.interval()
UNIT = Constants(1.0, 1.0, 1.0, 0.0, 1.0)


def test_supercritical_selector_gamma4():
    b = select_supercritical_params(4.0, UNIT, tau=1.0, theta=1.0, eps=0.1)
    assert b.c == pytest.approx(0.25, abs=1e-9)
    assert b.sigma == pytest.approx(0.25, abs=1e-9)
    assert b.alpha1 == pytest.approx(640.0, rel=1e-7)
    assert b.delta == pytest.approx(0.5 * 9.765625e-5, rel=1e-6)
    assert b.violations() == []


def test_supercritical_selector_gamma3():
    b = select_supercritical_params(3.0, UNIT, tau=1.0, theta=1.0, eps=0.1)
    assert b.beta == 0.5
    assert b.c == pytest.approx(0.25, abs=1e-9)


def test_huge_k0_inadmissible():
    with pytest.raises(InadmissibleConstants):
        select_supercritical_params(4.0, Constants(1.0, 1.0, 1.0, 1e6, 1.0), 1.0, 1.0, 0.1)


def test_subcritical_selector_gamma1():
    b = select_subcritical_params(1.0, UNIT, tau=1.0, eps=0.1)
    assert b.ell == pytest.approx(0.25, abs=1e-9)
    assert b.sigma_bar == pytest.approx(0.25, abs=1e-9)
    assert b.alpha1 == pytest.approx(640.0, rel=1e-7)
    assert b.delta == pytest.approx(9.765625e-6, rel=1e-6)


def test_subcritical_selector_gamma2():
    b = select_subcritical_params(2.0, UNIT, tau=1.0, eps=0.1, b=1.0)
    assert b.delta == pytest.approx(0.5 * 0.25**2 / 32.0, rel=1e-6)
    assert b.alpha1 == pytest.approx(640.0, rel=1e-7)


def test_subcritical_selector_near_two():
    b = select_subcritical_params(1.99, UNIT, tau=1.0, eps=0.1)
    assert b.beta == pytest.approx(0.01)
    assert b.violations() == []


def test_selector_rejects_small_gamma():
    with pytest.raises(ValueError):
        select_params(DegenerateCoefficient(0.5), G, 0.1, 1.0)


def test_zeta_values():
    sup = select_supercritical_params(4.0, UNIT, 1.0, 1.0, 0.1)
    assert eval_zeta(sup, G, 0.05) == pytest.approx(10.0)
    sub = select_subcritical_params(1.0, UNIT, 1.0, 0.1)
    assert eval_zeta(sub, G, 0.05) == pytest.approx(0.05)


def test_xi_zero_inside():
    b = select_supercritical_params(4.0, UNIT, 1.0, 1.0, 0.1)
    coef = DegenerateCoefficient(4.0)
    t = b.tau - 0.5 * b.delta
    assert eval_zeta(b, G, 0.3) == 0.0 and eval_xi(b, G, 0.3, t) == 0.0
    d = eval_xi_derivatives(b, coef, G, np.array([0.3]), t)
    assert d.dt_xi[0] == 0 and d.grad_xi[0] == 0 and d.div_a_grad_xi[0] == 0


@pytest.mark.parametrize("gamma", [4.0, 3.0, 1.5, 1.0])
def test_grad_xi_matches_central_differences(gamma):
    coef = DegenerateCoefficient(gamma)
    b = select_params(coef, G, 0.1, 1.0)
    rng = np.random.default_rng(7)
    d = rng.uniform(0.005, 0.095, 100)
    x = np.where(rng.random(100) < 0.5, d, 1.0 - d)
    t = b.tau - 0.5 * b.delta
    h = 1e-6 * d
    fd = (eval_xi(b, G, x + h, t) - eval_xi(b, G, x - h, t)) / (2 * h)
    exact = eval_xi_derivatives(b, coef, G, x, t).grad_xi
    assert np.allclose(fd, exact, rtol=1e-6, atol=0)


def test_dt_xi_negative_in_layer():
    b = select_supercritical_params(4.0, UNIT, 1.0, 1.0, 0.1)
    d = eval_xi_derivatives(b, DegenerateCoefficient(4.0), G, np.array([0.02, 0.07]), b.tau)
    assert np.all(d.dt_xi < 0)


def test_verify_E1_gamma4_passes_and_negative_control_fails():
    coef = DegenerateCoefficient(4.0)
    b = select_params(coef, G, 0.1, 1.0)
    cert = verify_E1(b, coef, G)
    assert cert.passed and cert.worst_value < 0
    bad = verify_E1(b.with_overrides(alpha1=1.0), coef, G)
    assert not bad.passed and bad.worst_value > 0


def test_verify_E1_grid_inside_is_zero():
    coef = DegenerateCoefficient(4.0)
    b = select_params(coef, G, 0.1, 1.0)
    cert = verify_E1(b, coef, G, xs=np.linspace(0.2, 0.45, 50))
    assert cert.passed and cert.worst_value == 0.0


@pytest.mark.parametrize("gamma", [1.0, 2.0])
def test_verify_D1_and_delta_control(gamma):
    coef = DegenerateCoefficient(gamma)
    b = select_params(coef, G, 0.1, 1.0)
    assert isinstance(b, SubcriticalBarrier)
    assert verify_D1(b, coef, G).passed
    bad = verify_D1(b.with_overrides(delta=b.delta * 1e6), coef, G, n_space=2000, n_time=50)
    assert not bad.passed and bad.worst_value > 0


def test_verify_E2_ratio_stabilizes():
    cert = verify_E2(DegenerateCoefficient(4.0), G, [0.2, 0.1, 0.05, 0.025], n_space=2000)
    assert cert.passed
    ratios = cert.data["ratios"]
    assert max(ratios) / min(ratios) < 1.2


def test_verify_D2_bounded():
    coef = DegenerateCoefficient(1.0)
    cert = verify_D2(coef, G, [0.2, 0.1, 0.05, 0.025], n_space=2000)
    assert cert.passed
    assert cert.worst_value <= cutoff_bound_constant(coef, G, pointwise=True)


@pytest.mark.parametrize("gamma", [3.0, 1.5])
def test_normal_derivative(gamma):
    b = select_params(DegenerateCoefficient(gamma), G, 0.1, 1.0)
    lo, hi = b.window()
    cert = normal_derivative_check(b, G, np.linspace(lo, hi, 12)[1:-1])
    assert cert.passed and cert.worst_value <= 1e-10


def test_smoothstep_and_cutoff():
    s, s1, _ = smoothstep(np.array([0.5]))
    assert s1[0] == pytest.approx(15.0 / 8.0)
    eta = CutoffFunction(0.3)
    assert eta.profile(0.2)[0] == pytest.approx(1.0)
    assert eta.profile(0.15)[0] == pytest.approx(0.0)
    d = np.linspace(0.15, 0.2, 10_000)
    assert np.max(np.abs(eta.profile(d)[1])) * 0.3 <= eta.A1 * (1 + 1e-12)
    assert np.max(np.abs(eta.profile(d)[2])) * 0.09 <= eta.A2 * (1 + 1e-12)


def test_regularizer():
    psi = Regularizer(0.01)
    z = np.linspace(-2, 2, 41)
    assert np.allclose(psi(z), np.sqrt(z**2 + 0.01))
    assert np.all(psi.second(z) > 0)
    with pytest.raises(ValueError):
        Regularizer(0.0)


def test_barrier_kinds():
    assert isinstance(select_params(DegenerateCoefficient(2.5), G, 0.1, 1.0), SupercriticalBarrier)
    assert math.isclose(select_params(DegenerateCoefficient(2.5), G, 0.1, 1.0).beta, 0.25)
