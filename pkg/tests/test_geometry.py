import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dul.geometry import INNER, OUTER, SHELL, DomainGeometry, GeometryError


@pytest.fixture
def unit():
    return DomainGeometry.interval()


def test_interval_distance(unit):
    assert unit.distance(0.25) == 0.25
    assert unit.distance(0.5) == 0.5
    assert unit.distance(0.9) == pytest.approx(0.1)


def test_disk_distance():
    assert DomainGeometry.disk(1.0, 2).distance(0.7) == pytest.approx(0.3)


def test_distance_outside_rejected(unit):
    with pytest.raises(GeometryError):
        unit.distance(1.5)


def test_grad_distance(unit):
    assert unit.grad_distance(0.25) == 1.0
    assert unit.grad_distance(0.75) == -1.0
    assert DomainGeometry.disk(1.0, 2).grad_distance(0.5) == -1.0


def test_grad_distance_ridge_rejected(unit):
    with pytest.raises(GeometryError):
        unit.grad_distance(0.5)


def test_laplacian_distance():
    assert DomainGeometry.interval().laplacian_distance(0.1) == 0.0
    assert DomainGeometry.disk(1.0, 2).laplacian_distance(0.5) == pytest.approx(-2.0)
    assert DomainGeometry.disk(1.0, 3).laplacian_distance(0.5) == pytest.approx(-4.0)


def test_regularity_constants():
    assert DomainGeometry.interval().regularity_constants(0.1) == (0.0, 1.0)
    k0, nu0 = DomainGeometry.disk(1.0, 2).regularity_constants(0.1)
    assert k0 == pytest.approx(1.0 / 0.9) and nu0 == 1.0
    k0, nu0 = DomainGeometry.disk(1.0, 2).regularity_constants(0.5)
    assert k0 == pytest.approx(2.0) and nu0 == 1.0


def test_shell_membership(unit):
    assert unit.shell_membership(0.3, 0.2) == INNER
    assert unit.shell_membership(0.12, 0.2) == SHELL
    assert unit.shell_membership(0.05, 0.2) == OUTER


def test_eps0_in_unit_interval():
    for g in (DomainGeometry.interval(), DomainGeometry.interval(0, 10), DomainGeometry.disk(3.0, 2)):
        assert 0 < g.eps0 < 1


def test_measures():
    assert DomainGeometry.interval(0, 2).measure() == 2.0
    assert DomainGeometry.disk(1.0, 2).measure() == pytest.approx(math.pi)
    assert DomainGeometry.disk(1.0, 3).measure() == pytest.approx(4.0 * math.pi / 3.0)


def test_bad_geometry():
    with pytest.raises(GeometryError):
        DomainGeometry.interval(1.0, 0.0)
    with pytest.raises(GeometryError):
        DomainGeometry.disk(-1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0))
def test_interval_distance_is_one_lipschitz_min(x):
    g = DomainGeometry.interval()
    assert g.distance(x) == pytest.approx(min(x, 1.0 - x))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(1e-4, 1e-2))
def test_distance_gradient_matches_difference(x, h):
    g = DomainGeometry.disk(1.0, 2)
    fd = (g.distance(min(x + h, 1.0)) - g.distance(max(x - h, 0.0))) / (min(x + h, 1.0) - max(x - h, 0.0))
    assert fd == pytest.approx(g.grad_distance(x), abs=1e-9)


def test_points_at_distance_roundtrip():
    g = DomainGeometry.interval()
    d = np.linspace(0.0, 0.4, 9)
    x, side = g.points_at_distance(d)
    assert np.allclose(g.distance(x), np.concatenate([d, d]))
    assert set(side.tolist()) == {0, 1}
