import numpy as np
import pytest

from dul.coefficients import NONDIVERGENCE
from dul.experiments import (
    INCONCLUSIVE,
    NONUNIQUE,
    UNIQUE,
    contrast_csv,
    existence_bound_check,
    flip_location,
    form_threshold_contrast,
    heat_dirichlet_gap,
    iteration_replay,
    nonuniqueness_demo,
    uniqueness_probe,
    verdict_for,
)
from dul.geometry import DomainGeometry
from dul.weighted_norms import SampledField

G = DomainGeometry.interval()


def test_verdict_rules():
    assert verdict_for([1.0, 0.5, 0.2, 0.1]) == UNIQUE
    assert verdict_for([1.0, 0.95, 0.9, 0.85]) == NONUNIQUE
    assert verdict_for([1.0, 0.7, 0.5, 0.5]) == INCONCLUSIVE
    assert verdict_for([1.0, 0.05, 0.1, 0.1]) == INCONCLUSIVE
    assert verdict_for([0.0, 0.0, 0.0, 0.0]) == UNIQUE


def test_probe_dichotomy():
    hi = uniqueness_probe(1.5, G)
    lo = uniqueness_probe(0.5, G)
    assert hi.verdict == UNIQUE and lo.verdict == NONUNIQUE
    assert all(b < a for a, b in zip(hi.gaps, hi.gaps[1:]))
    assert lo.gaps[-1] > 10 * 1e-14


def test_probe_identical_pair():
    rep = uniqueness_probe(0.5, G, g_pair=(0.0, 0.0))
    assert rep.verdict == UNIQUE and max(rep.gaps) == 0.0


def test_probe_symmetric_in_pair():
    a = uniqueness_probe(1.5, G, g_pair=(0.0, 1.0))
    b = uniqueness_probe(1.5, G, g_pair=(1.0, 0.0))
    assert np.allclose(a.gaps, b.gaps, rtol=1e-12, atol=0)


def test_probe_rejects_bad_sweep():
    with pytest.raises(ValueError):
        uniqueness_probe(1.5, G, eps_sweep=[0.1, 0.2])


def test_probe_report_serialisation():
    rep = uniqueness_probe(1.5, G)
    d = rep.to_dict()
    assert d["schema_version"] == "1" and d["verdict"] == UNIQUE
    assert rep.to_csv().splitlines()[0] == "eps,gap,refined_gap"


def test_nonuniqueness_demo():
    rep = nonuniqueness_demo(0.5, G, T=1.0)
    u_a, u_b, residuals, sep = rep
    assert sep > 0.05 and max(residuals) < 1e-3
    assert u_a.values[0].max() == 0.0 and u_b.values[0].max() == 0.0


def test_nonuniqueness_heat_oracle():
    rep = nonuniqueness_demo(0.0, G, T=0.05)
    assert rep.separation == pytest.approx(heat_dirichlet_gap(0.05), rel=1e-3)


def test_nonuniqueness_short_time():
    assert nonuniqueness_demo(0.5, G, T=1e-4).separation < 0.01


def test_nonuniqueness_rejects_gamma_one():
    with pytest.raises(ValueError, match="optimal"):
        nonuniqueness_demo(1.0, G)


def test_contrast_and_flips():
    rows = form_threshold_contrast(G, [0.5, 1.5, 2.5])
    assert flip_location(rows, "divergence") == (0.5, 1.5)
    assert flip_location(rows, NONDIVERGENCE) == (1.5, 2.5)
    assert contrast_csv(rows).splitlines()[0] == "form,gamma,T,verdict,gap_ratio"
    assert form_threshold_contrast(G, []) == []


def test_replay_zero_difference():
    x = (np.arange(200) + 0.5) / 200
    t = np.linspace(0, 0.5, 9)
    w = SampledField(x, t, np.zeros((9, 200)), np.full(200, 1 / 200), faces=np.linspace(0, 1, 201))
    rep = iteration_replay(4.0, G, 0.5, 1.0, w=w, max_rungs=2000)
    assert rep.all_hold and rep.final_bound == 0.0


def test_replay_subcritical_bound_shrinks_with_eps():
    bounds = [iteration_replay(1.5, G, 0.5, 1.2, eps=e, max_rungs=4000).final_bound for e in (0.2, 0.1)]
    assert bounds[1] < bounds[0]


def test_existence_bound():
    rep = existence_bound_check(4.0, 2.0, 1.0, 0.5, G)
    assert rep.stable and rep.C_hat >= 1.0
    flat = existence_bound_check(4.0, 1e-9, 1.0, 0.5, G)
    assert flat.C_hat == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        existence_bound_check(4.0, 2.5, 1.0, 0.5, G)
