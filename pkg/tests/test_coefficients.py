import numpy as np
import pytest

from dul.coefficients import DegenerateCoefficient, Modulation
from dul.geometry import DomainGeometry

G = DomainGeometry.interval()


def test_quadratic_value():
    assert DegenerateCoefficient(2.0).eval_a(G, 0.25, 0.3) == pytest.approx(0.0625)


def test_quartic_value_and_gradient():
    c = DegenerateCoefficient(4.0)
    assert c.eval_a(G, 0.5, 0.0) == pytest.approx(0.0625)
    assert abs(c.eval_grad_a(G, 0.49, 0.0)) == pytest.approx(4.0 * 0.49**3)


def test_constant_coefficient():
    c = DegenerateCoefficient(0.0, C0=3.0)
    assert c.eval_a(G, 0.1, 0.0) == pytest.approx(3.0)
    assert c.eval_grad_a(G, 0.1, 0.0) == 0.0


def test_certify_a3_constant_modulation():
    c = DegenerateCoefficient(2.0)
    xs = np.linspace(0, 1, 101)
    ts = np.linspace(0, 1, 11)
    assert c.certify_a3(G, xs, ts) == (1.0, 1.0, 2.0, True)


def test_certify_a3_cosine_modulation():
    c = DegenerateCoefficient(1.5, C0=2.0, modulation=Modulation.cosine(0.5, 1.0))
    ct0, c0, c1, ok = c.certify_a3(G, np.linspace(0, 1, 201), np.linspace(0, 2, 41))
    assert (ct0, c0, c1) == (1.0, 2.0, 3.0) and ok


def test_certify_a3_single_point():
    c = DegenerateCoefficient(2.0)
    assert c.certify_a3(G, [0.3], [0.0])[-1]


def test_vanishes_only_on_boundary():
    c = DegenerateCoefficient(1.5)
    x = np.linspace(0, 1, 1001)
    a = c.eval_a(G, x, 0.0)
    assert np.all(a >= 0)
    assert np.all((a == 0) == ((x == 0) | (x == 1)))


def test_modulation_parse():
    assert Modulation.parse("constant") == Modulation.constant()
    m = Modulation.parse("cosine(0.5, 1.0, 2)")
    assert (m.m_lo, m.m_hi, m.period) == (0.5, 1.0, 2.0)
    assert m(0.0) == pytest.approx(1.0) and m(1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        Modulation.parse("sawtooth(1)")


def test_invalid_coefficients():
    with pytest.raises(ValueError):
        DegenerateCoefficient(-1.0)
    with pytest.raises(ValueError):
        DegenerateCoefficient(1.0, C0=0.0)
    with pytest.raises(ValueError):
        DegenerateCoefficient(1.0, form="weird")
