import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import BSpline

from rulebayes.errors import DimensionMismatch, OutOfDomain
from rulebayes.expr import Dataset
from rulebayes.likelihoods import (
    LogisticModel,
    MultivariateLinear,
    SplineModel,
    UnivariateLinear,
    bspline_basis,
    clamped_knots,
)

KNOTS = clamped_knots(0.0, 2 * math.pi, 50)


def test_linear_prediction():
    assert UnivariateLinear().predict(np.array([1.0, 2.0, 3.0]), {"x": np.array([4.5])})[0] == 10.0


def test_single_datum_loglik():
    d = Dataset({"x": [0.0], "y": [1.0]})
    got = UnivariateLinear().log_likelihood(np.array([1.0, 0.0, 1.0]), d)
    assert got == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)
    assert got == pytest.approx(-0.9189, abs=1e-4)


def test_multivariate_matches_manual():
    rng = np.random.default_rng(0)
    d = Dataset({"a": rng.normal(size=5), "b": rng.normal(size=5), "y": rng.normal(size=5)})
    m = MultivariateLinear(("a", "b"), "y")
    assert m.param_names == ("a_co", "b_co", "b", "sigma")
    theta = np.array([0.5, -1.0, 0.2, 1.3])
    mu = 0.5 * d["a"] - d["b"] + 0.2
    manual = np.sum(-0.5 * ((d["y"] - mu) / 1.3) ** 2 - math.log(1.3) - 0.5 * math.log(2 * math.pi))
    assert m.log_likelihood(theta, d) == pytest.approx(manual, rel=1e-12)
    assert m.loglik_fn(d)(theta) == pytest.approx(manual, rel=1e-12)


def test_theta_shape_checked():
    with pytest.raises(DimensionMismatch):
        UnivariateLinear().predict(np.zeros(2), {"x": np.zeros(1)})
    with pytest.raises(DimensionMismatch):
        MultivariateLinear(("a",)).predict(np.zeros(3), {"z": np.zeros(1)})


def test_logistic_zero_parameters():
    m = LogisticModel(("a", "b"), "y")
    p = m.predict(np.zeros(3), {"a": np.array([-5.0, 3.0]), "b": np.array([1.0, 100.0])})
    np.testing.assert_array_equal(p, [0.5, 0.5])


def test_logistic_perfect_classification_clamped():
    d = Dataset({"a": [-1.0, 1.0, 2.0], "y": [0.0, 1.0, 1.0]})
    ll = LogisticModel(("a",), "y").log_likelihood(np.array([1e4, 0.0]), d)
    assert ll < 0
    assert ll == pytest.approx(-3e-12, abs=1e-13)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(0.01, 2), st.floats(0.1, 3))
def test_logistic_monotone_in_coefficient(c, step, x):
    m = LogisticModel(("a",), "y")
    inputs = {"a": np.array([x])}
    lo = m.predict(np.array([c, 0.1]), inputs)[0]
    hi = m.predict(np.array([c + step, 0.1]), inputs)[0]
    assert hi > lo


def test_logistic_fast_path_matches():
    rng = np.random.default_rng(2)
    d = Dataset({"a": rng.normal(size=20), "b": rng.normal(size=20), "y": (rng.random(20) < 0.4).astype(float)})
    m = LogisticModel(("a", "b"), "y")
    theta = np.array([0.7, -0.3, 0.1])
    assert m.loglik_fn(d)(theta) == pytest.approx(m.log_likelihood(theta, d), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.integers(0, 2))
def test_linear_gradient_matches_finite_difference(theta, j):
    rng = np.random.default_rng(7)
    d = Dataset({"x": rng.uniform(0, 2, 15), "y": rng.normal(1, 2, 15)})
    m = UnivariateLinear()
    theta = np.array(theta)
    theta[2] = abs(theta[2]) + 0.5
    a, b, s = theta
    r = d["y"] - a - b * d["x"]
    grad = [np.sum(r) / s**2, np.sum(r * d["x"]) / s**2, -d.n / s + np.sum(r * r) / s**3]
    h = 1e-6
    e = np.zeros(3)
    e[j] = h
    fd = (m.log_likelihood(theta + e, d) - m.log_likelihood(theta - e, d)) / (2 * h)
    assert fd == pytest.approx(grad[j], rel=1e-5, abs=1e-5)


# ---------------------------------------------------------------------------
# B-splines


def test_knot_vector():
    assert len(KNOTS) == 58
    assert np.all(np.diff(KNOTS) >= 0)
    assert np.all(KNOTS[:4] == 0.0) and np.all(KNOTS[-4:] == 2 * math.pi)


def test_basis_matches_scipy_design_matrix():
    x = np.linspace(0, 2 * math.pi, 301)
    ours = bspline_basis(x, KNOTS)
    ref = BSpline.design_matrix(x, KNOTS, 3).toarray()
    assert ours.shape == (301, 54)
    np.testing.assert_allclose(ours, ref, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 2 * math.pi))
def test_partition_of_unity(x):
    assert bspline_basis([x], KNOTS).sum() == pytest.approx(1.0, abs=1e-12)


def test_continuity_at_interior_knot():
    k = KNOTS[20]
    eps = 1e-9
    left = bspline_basis([k - eps], KNOTS)
    right = bspline_basis([k + eps], KNOTS)
    np.testing.assert_allclose(left, right, atol=1e-8)
    np.testing.assert_allclose(bspline_basis([k], KNOTS), right, atol=1e-8)


def test_degree_zero_indicator():
    t = np.array([0.0, 1.0, 2.0, 3.0])
    np.testing.assert_array_equal(bspline_basis([1.5], t, degree=0), [[0.0, 1.0, 0.0]])


def test_basis_domain():
    with pytest.raises(OutOfDomain):
        bspline_basis([7.0], KNOTS)


def test_spline_constant_coefficients():
    m = SplineModel(KNOTS)
    theta = np.zeros(len(m.param_names))
    for i in range(3):
        theta[i * 56] = 0.37  # a0 of each snapshot
        theta[i * 56 + 1] = 0.1
    pred = m.predict(theta, {"x": np.linspace(0, 6, 9)})
    for out in ("u1", "u2", "u3"):
        np.testing.assert_allclose(pred[out], 0.37, atol=1e-12)
    assert len(m.param_names) == 168


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10.0))
def test_spline_reparameterization_invariance(c):
    m = SplineModel(KNOTS, outputs=("u1",))
    rng = np.random.default_rng(0)
    theta = np.concatenate([[0.2, 0.05], rng.normal(size=54)])
    scaled = theta.copy()
    scaled[1] /= c
    scaled[2:] *= c
    x = {"x": np.linspace(0, 2 * math.pi, 40)}
    np.testing.assert_allclose(m.predict(theta, x)["u1"], m.predict(scaled, x)["u1"], rtol=1e-10, atol=1e-12)


def test_spline_loglik_decreases_away_from_truth():
    m = SplineModel(KNOTS, outputs=("u1",))
    x = np.linspace(0, 2 * math.pi, 32, endpoint=False)
    rng = np.random.default_rng(1)
    theta = np.concatenate([[0.0, 0.001], rng.normal(size=54)])
    truth = m.predict(theta, {"x": x})["u1"]
    d = Dataset({"x": x, "u1": truth + rng.normal(0, 0.002, 32)})
    base = m.log_likelihood(theta, d)
    assert math.isfinite(base)
    bumped = theta.copy()
    bumped[0] += 10.0
    assert m.log_likelihood(bumped, d) < base
    assert m.loglik_fn(d)(theta) == pytest.approx(base, rel=1e-12)
