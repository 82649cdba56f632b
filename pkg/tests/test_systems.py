import numpy as np
import pytest

from streamlab import errors
from streamlab.boxcover import Box
from streamlab.systems import (
    SemiFlowSpec, analysis_region, circle_poles, estimate_omega_limit, evaluate, evaluate_batch, henon,
    lipschitz_estimate, logistic, lorenz, lorenz_trapping_box, orbit, periodic_orbits, sin_pi_flow,
    system_from_dict, tent, trapping_region, unimodal_composite, verify_trapping,
)

from conftest import PERIOD2_32

CATALOG = [logistic(2.5), logistic(3.2), logistic(3.84), sin_pi_flow(), circle_poles(), unimodal_composite()]


def test_evaluate_examples():
    assert evaluate(logistic(2.5), 0.5)[0] == pytest.approx(0.625, abs=0)
    assert evaluate(logistic(2.5), 0.6)[0] == pytest.approx(0.6, abs=1e-15)
    assert evaluate(sin_pi_flow(), 0.0)[0] == 0.0


def test_fixed_points_machine_precision():
    for mu in (2.5, 3.2, 3.84):
        s = logistic(mu)
        p = 1 - 1 / mu
        assert evaluate(s, 0.0)[0] == 0.0
        assert abs(evaluate(s, p)[0] - p) < 4 * np.finfo(float).eps


def test_orbit_examples():
    np.testing.assert_allclose(orbit(logistic(2.5), 0.6, 3).ravel(), [0.6] * 4, atol=1e-15)
    np.testing.assert_allclose(orbit(logistic(3.2), 0.6875, 2).ravel(), [0.6875] * 3, atol=1e-15)
    o = orbit(logistic(3.2), 0.5130, 2).ravel()
    np.testing.assert_allclose(o, [0.5130, 0.7995, 0.5130], atol=1e-3)


def test_orbit_semigroup_ode():
    s = sin_pi_flow()
    a = orbit(s, 0.37, 5).ravel()
    b = orbit(s, a[3], 2).ravel()
    assert abs(a[-1] - b[-1]) < 1e-12


def test_evaluate_rejects_far_points():
    with pytest.raises(errors.DomainViolation):
        evaluate(logistic(2.5), 7.0)


def test_nonfinite_reports_index():
    s = henon(region=Box((-1e200, -1e200), (1e200, 1e200)))
    with pytest.raises(errors.NonFinite) as exc:
        evaluate_batch(s, np.array([[0.1, 0.1], [1e200, 0.0]]))
    assert exc.value.index == 1


def test_omega_limits():
    w = estimate_omega_limit(logistic(2.5), 0.3)
    np.testing.assert_allclose(w.ravel(), [0.6], atol=1e-6)
    w = np.sort(estimate_omega_limit(logistic(3.2), 0.3).ravel())
    np.testing.assert_allclose(w, PERIOD2_32, atol=1e-6)
    w = estimate_omega_limit(sin_pi_flow(), 0.9)
    np.testing.assert_allclose(w.ravel(), [0.0], atol=1e-6)


@pytest.mark.parametrize("system", [logistic(3.2), logistic(3.84), sin_pi_flow()])
def test_omega_forward_invariant(system):
    tol = 1e-6
    w = estimate_omega_limit(system, 0.3, tol=tol)
    img = evaluate_batch(system, w)
    d = np.abs(img[:, None, 0] - w[None, :, 0]).min(axis=1)
    assert np.all(d <= 2 * tol)


def test_trapping_region_examples():
    b = trapping_region(logistic(3.5))
    c1 = 3.5 * 0.25
    assert b.hi[0] == c1
    assert b.lo[0] == pytest.approx(3.5 * c1 * (1 - c1), abs=1e-15)
    assert trapping_region(sin_pi_flow()) == Box((0.0,), (1.0,))
    with pytest.raises(errors.NoCatalogRule):
        trapping_region(logistic(1.5))


def test_verify_trapping_examples():
    assert verify_trapping(logistic(3.5), Box((0.382,), (0.875,)), depth=10).ok
    res = verify_trapping(logistic(3.5), Box((0.5,), (0.6,)), depth=8)
    assert not res.ok
    assert abs(res.witness[0] - 0.5) < 0.05
    assert verify_trapping(sin_pi_flow(), Box((0.0,), (1.0,)), depth=8).ok


@pytest.mark.parametrize("system", CATALOG + [lorenz()], ids=lambda s: s.kind)
def test_catalog_trapping_regions_verify(system):
    assert verify_trapping(system, trapping_region(system), depth=10 if system.dimension == 1 else 4).ok


def test_lorenz_box_contains_attractor_orbit():
    s = lorenz()
    box = lorenz_trapping_box(10.0, 28.0, 8 / 3)
    pts = orbit(s, [1.0, 1.0, 20.0], 40)
    assert np.all(box.contains(pts))


def test_lipschitz_examples():
    assert lipschitz_estimate(logistic(4.0), Box((0.0,), (1.0,))) >= 4.0
    assert lipschitz_estimate(logistic(2.5), Box((0.59,), (0.61,))) == pytest.approx(0.75, rel=0.1)
    val = lipschitz_estimate(sin_pi_flow(), Box((0.0,), (1.0,)))
    assert 0 < val <= np.exp(np.pi) * 1.5


def test_periodic_orbits_period2():
    found = [o for o in periodic_orbits(logistic(3.2), 0.0, 1.0, max_period=2) if o[0] == 2]
    assert len(found) == 1
    np.testing.assert_allclose(found[0][1], PERIOD2_32, atol=1e-9)


def test_config_validation():
    with pytest.raises(errors.ConfigurationError):
        SemiFlowSpec("banana", {}, 1)
    with pytest.raises(errors.ConfigurationError):
        lorenz(step_count=8)


def test_system_dict_roundtrip():
    for s in CATALOG + [lorenz(), tent(1.5)]:
        assert system_from_dict(s.to_dict()) == s


def test_analysis_region_logistic_spans_zero():
    r = analysis_region(logistic(2.5))
    assert r.lo[0] == 0.0 and r.hi[0] == pytest.approx(0.625)
