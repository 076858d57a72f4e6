import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semicomplete.data import gibbon_geometry
from semicomplete.integrate import (
    MaskIntegrator,
    gauss_hermite_rule,
    mh_prob_unobserved,
    mh_prob_unobserved_oracle,
    secr_prob_unobserved,
)
from semicomplete.model import SurveyGeometry, rectangular_mask

SQRT_PI = math.sqrt(math.pi)


def test_rule_q1():
    r = gauss_hermite_rule(1)
    assert r.nodes.tolist() == [0.0]
    assert r.weights[0] == pytest.approx(SQRT_PI, rel=1e-14)


def test_rule_q2():
    r = gauss_hermite_rule(2)
    np.testing.assert_allclose(r.nodes, [-1 / math.sqrt(2), 1 / math.sqrt(2)], rtol=1e-14)
    np.testing.assert_allclose(r.weights, [SQRT_PI / 2] * 2, rtol=1e-14)


def test_rule_q100_moments(rule100):
    assert rule100.weights.sum() == pytest.approx(SQRT_PI, rel=1e-12)
    assert np.dot(rule100.weights, rule100.nodes**2) == pytest.approx(SQRT_PI / 2, rel=1e-10)


@pytest.mark.parametrize("q", [3, 10, 50, 100, 250, 500])
def test_rule_structure(q):
    r = gauss_hermite_rule(q)
    assert np.all(np.diff(r.nodes) > 0)
    np.testing.assert_allclose(r.nodes, -r.nodes[::-1], atol=1e-12)
    np.testing.assert_allclose(r.weights, r.weights[::-1], rtol=1e-10, atol=1e-300)
    assert np.all(r.weights >= 0)
    assert r.weights.sum() == pytest.approx(SQRT_PI, rel=1e-12)


@pytest.mark.parametrize("q", [5, 20, 60])
def test_rule_polynomial_exactness(q):
    r = gauss_hermite_rule(q)
    # even moments of exp(-v^2): Gamma(k + 1/2)
    for k in range(q):
        exact = math.gamma(k + 0.5)
        assert np.dot(r.weights, r.nodes ** (2 * k)) == pytest.approx(exact, rel=1e-9)


@pytest.mark.parametrize("q", [0, 501, 2.5])
def test_rule_order_out_of_range(q):
    with pytest.raises(ValueError):
        gauss_hermite_rule(q)


def test_prob_unobserved_point_mass(rule100):
    assert mh_prob_unobserved(0.0, 0.0, 1, rule100) == pytest.approx(0.5, abs=1e-14)
    assert mh_prob_unobserved(0.0, 0.0, 6, rule100) == pytest.approx(0.015625, abs=1e-14)


def test_prob_unobserved_rejects_bad_input(rule100):
    with pytest.raises(ValueError):
        mh_prob_unobserved(float("nan"), 1.0, 6, rule100)
    with pytest.raises(ValueError):
        mh_prob_unobserved(0.0, -1.0, 6, rule100)
    with pytest.raises(ValueError):
        mh_prob_unobserved_oracle(0.0, 1.0, 6, panels=100)


def test_oracle_examples():
    assert mh_prob_unobserved_oracle(0.0, 0.0, 6) == pytest.approx(0.015625, abs=1e-10)
    a = mh_prob_unobserved_oracle(0.0, 1.0, 1, 100_000)
    b = mh_prob_unobserved_oracle(0.0, 1.0, 1, 200_000)
    assert 0.015625 * 64 * 0.4 < a < 0.6
    assert abs(a - b) < 1e-8


def test_quadrature_accuracy_moderate_sigma(rule100):
    oracle = mh_prob_unobserved_oracle(-1.2, 3.3, 6, 1_000_000)
    assert abs(mh_prob_unobserved(-1.2, 3.3, 6, rule100) - oracle) < 5e-6


def test_quadrature_accuracy_large_sigma(rule100):
    oracle = mh_prob_unobserved_oracle(-1.2, 10.0, 6, 1_000_000)
    err = abs(mh_prob_unobserved(-1.2, 10.0, 6, rule100) - oracle)
    assert 5e-6 < err < 5e-3


def test_quadrature_refinement_small_sigma(rule100):
    r200 = gauss_hermite_rule(200)
    for sigma in (0.0, 0.5, 1.0, 2.0):
        for alpha in np.linspace(-5, 3, 17):
            for T in (1, 3, 6, 10):
                a = mh_prob_unobserved(alpha, sigma, T, rule100)
                b = mh_prob_unobserved(alpha, sigma, T, r200)
                assert abs(a - b) < 1e-8


@settings(max_examples=50, deadline=None)
@given(st.floats(-6, 4), st.floats(0, 5), st.integers(1, 12))
def test_prob_unobserved_monotone(alpha, sigma, T):
    rule = gauss_hermite_rule(100)
    v = mh_prob_unobserved(alpha, sigma, T, rule)
    assert 0.0 <= v <= 1.0
    assert mh_prob_unobserved(alpha + 0.5, sigma, T, rule) < v
    assert mh_prob_unobserved(alpha, sigma, T + 1, rule) < v


def _single(point, detector):
    return SurveyGeometry(np.array([detector]), np.array([point]), 0.01)


def test_secr_point_at_detector():
    assert secr_prob_unobserved(1.0, _single([0.0, 0.0], [0.0, 0.0]), 1) == 0.0


def test_secr_half_height():
    sigma = 0.7
    d = sigma * math.sqrt(2 * math.log(2))
    g = SurveyGeometry(np.array([[0.0, 0.0]]), np.array([[d, 0.0]]), d * d)
    assert secr_prob_unobserved(sigma, g, 1) == pytest.approx(0.5, abs=1e-12)


def _brute(sigma, geometry, T):
    d2 = ((geometry.mask[:, None] - geometry.detectors[None]) ** 2).sum(-1)
    miss = np.prod(1 - np.exp(-d2 / (2 * sigma**2)), axis=1) ** T
    return miss.mean()


def test_secr_grid_refinement():
    # 5 x 5 km region centred on the array, a buffer of about 3 sigma
    det = np.array([[2.0, 2.5], [2.5, 2.5], [3.0, 2.5]])
    coarse, a1 = rectangular_mask((0.0, 5.0), (0.0, 5.0), 10, 10)
    fine, a2 = rectangular_mask((0.0, 5.0), (0.0, 5.0), 100, 100)
    v = secr_prob_unobserved(0.6, SurveyGeometry(det, coarse, a1), 1)
    oracle = _brute(0.6, SurveyGeometry(det, fine, a2), 1)
    assert abs(v - oracle) < 1e-3


def test_secr_matches_brute_force_on_gibbon_layout():
    g = gibbon_geometry()
    for sigma in (0.3, 0.87, 2.0):
        assert secr_prob_unobserved(sigma, g, 1) == pytest.approx(_brute(sigma, g, 1), abs=1e-12)
        assert MaskIntegrator(g, 2).prob_unobserved(sigma) == pytest.approx(_brute(sigma, g, 2), abs=1e-12)


def test_secr_monotone_and_small_sigma_limit():
    g = gibbon_geometry()
    vals = [secr_prob_unobserved(s, g, 1) for s in (0.2, 0.5, 0.87, 1.5, 3.0)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    # mask points never coincide with detectors at this offset
    det = g.detectors + 0.01
    shifted = SurveyGeometry(det, g.mask, g.cell_area)
    assert secr_prob_unobserved(1e-4, shifted, 1) == pytest.approx(1.0, abs=1e-12)


def test_secr_rejects_nonpositive_sigma():
    with pytest.raises(ValueError):
        secr_prob_unobserved(0.0, gibbon_geometry(), 1)


def test_tabulated_integrator_matches_exact_sum():
    from semicomplete.integrate import TabulatedMaskIntegrator

    g = gibbon_geometry()
    tab = TabulatedMaskIntegrator(g, 1, 0.05, 10.0)
    exact = MaskIntegrator(g, 1)
    for sigma in np.exp(np.random.default_rng(0).uniform(np.log(0.05), np.log(10.0), 50)):
        a, b = tab.prob_unobserved(sigma), exact.prob_unobserved(sigma)
        assert a == pytest.approx(b, rel=1e-10)
        assert 1 - a == pytest.approx(1 - b, rel=1e-9)
    # outside the table the exact sum is used
    assert tab.prob_unobserved(0.01) == exact.prob_unobserved(0.01)
    assert tab.prob_unobserved(12.0) == exact.prob_unobserved(12.0)
