import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twinboot import theory


def test_sigma_true_gaussian():
    assert theory.sigma_true_gaussian(math.sqrt(120), 400) == pytest.approx(0.5477225575)
    assert theory.sigma_true_gaussian(3.0, 1) == 3.0
    assert theory.sigma_true_gaussian(0.0, 50) == 0.0
    with pytest.raises(ValueError):
        theory.sigma_true_gaussian(1.0, 0)


def test_curvature_correction_values():
    c = theory.curvature_correction(2.0, 1.0)
    assert c.epsilon == pytest.approx(0.135335283, abs=1e-9)
    assert c.lambda_perp == pytest.approx(1.135335283, abs=1e-9)
    assert c.lambda_par == pytest.approx(0.593994150, abs=1e-9)
    assert c.S == pytest.approx(1.13232, abs=1e-5)
    assert theory.sigma_theory_two_basin(2.0, 1.0, 1.0, 100) == pytest.approx(0.113232, abs=1e-6)


def test_large_separation_limit():
    c = theory.curvature_correction(60.0, 1.3)
    assert c.epsilon == 0.0
    assert c.S == pytest.approx(1.3, abs=1e-12)
    assert theory.sigma_theory_two_basin(60.0, 1.0, 0.4, 25) == pytest.approx(0.4 / 5)


@given(st.floats(0.5, 5), st.floats(0.2, 1.5), st.floats(0.01, 3), st.integers(1, 10_000))
def test_doubling_m_divides_by_sqrt2(d, s, sd, m):
    try:
        a = theory.sigma_theory_two_basin(d, s, sd, m)
    except theory.TheoryDomainError:
        return
    assert theory.sigma_theory_two_basin(d, s, sd, 2 * m) == pytest.approx(a / math.sqrt(2), rel=1e-12)


@given(st.floats(0, 20), st.floats(0.05, 5))
def test_parallel_curvature_at_centre_stays_positive(d, s):
    # eps * (d^2/s^2 - 1) peaks at 2 exp(-1.5) < 1, so the closed form is always defined
    c = theory.curvature_correction(d, s)
    assert c.lambda_par > 0 and c.S > 0


def test_invalid_width_rejected():
    with pytest.raises(ValueError):
        theory.curvature_correction(2.0, 0.0)


def test_estimator_variance_formulas():
    assert theory.estimator_variance(1.0) == 2.0
    assert theory.estimator_variance(1.0, "b-sample", 3) == 1.0
    assert theory.estimator_variance(2.0, "grouped", 8) == 1.0
    with pytest.raises(ValueError):
        theory.estimator_variance(1.0, "b-sample", 1)


def test_estimator_variances_monte_carlo():
    rng = np.random.default_rng(0)
    tau2, n = 1.5, 100_000
    w = rng.normal(scale=math.sqrt(tau2), size=(n, 2))
    two = (w[:, 0] - w[:, 1]) ** 2 / 2
    assert two.var() == pytest.approx(theory.estimator_variance(tau2), rel=0.05)
    b = rng.normal(scale=math.sqrt(tau2), size=(n, 4)).var(axis=1, ddof=1)
    assert b.var() == pytest.approx(theory.estimator_variance(tau2, "b-sample", 4), rel=0.05)
    d = 16
    g = (rng.normal(scale=math.sqrt(tau2), size=(n, d)) - rng.normal(scale=math.sqrt(tau2), size=(n, d)))
    g = (g ** 2).sum(axis=1) / (2 * d)
    assert g.var() == pytest.approx(theory.estimator_variance(tau2, "grouped", d), rel=0.05)


def test_hessian_oracle_matches_closed_form_at_center():
    closed = theory.curvature_correction(2.0, 1.0).S
    S, point, eig = theory.hessian_S(2.0, 1.0, at="center")
    assert S == pytest.approx(closed, abs=1e-8)
    np.testing.assert_allclose(sorted(eig), sorted([0.593994150, 1.135335283]), atol=1e-7)


def test_hessian_oracle_at_minimum_quantifies_offset():
    closed = theory.curvature_correction(3.0, 1.0).S
    S, point, _ = theory.hessian_S(3.0, 1.0, at="minimum")
    assert abs(point[1]) < 1e-8
    assert point[0] != -1.5
    assert abs(S - closed) < 1e-2


def test_value_hessian_agrees_with_gradient_hessian():
    a = theory.hessian_S(2.0, 1.0, method="gradient")[0]
    b = theory.hessian_S(2.0, 1.0, method="value", h=1e-4)[0]
    assert a == pytest.approx(b, abs=1e-6)
