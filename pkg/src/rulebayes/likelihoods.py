"""Likelihood models: univariate and multivariate linear regression, a cubic
B-spline regression with increment reparameterization, and logistic
classification.

Every model exposes ``param_names``, ``predict(theta, inputs)``,
``pointwise_loglik(theta, data)`` and ``log_likelihood(theta, data)``.  The
``loglik_fn``/``predictor`` methods return closures with the design matrices
precomputed, for use inside the sampler loop.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, OutOfDomain
from .expr import Dataset

LOG_2PI = math.log(2.0 * math.pi)
PROB_CLAMP = 1e-12


def _columns(inputs):
    return inputs.columns if isinstance(inputs, Dataset) else inputs


def _check_theta(model, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (len(model.param_names),):
        raise DimensionMismatch(
            f"expected {len(model.param_names)} parameters, got shape {theta.shape}"
        )
    return theta


def _design(inputs, features):
    cols = _columns(inputs)
    missing = [f for f in features if f not in cols]
    if missing:
        raise DimensionMismatch(f"inputs lack feature columns {missing}")
    return np.column_stack([np.asarray(cols[f], dtype=float) for f in features])


def normal_logpdf(x, mean, sd):
    z = (x - mean) / sd
    return -0.5 * z * z - math.log(sd) - 0.5 * LOG_2PI


class _Model:
    param_names: tuple = ()
    positive: tuple = ()
    target = "y"

    def index(self, name):
        return self.param_names.index(name)

    def log_likelihood(self, theta, data) -> float:
        return float(np.sum(self.pointwise_loglik(theta, data)))

    def loglik_fn(self, data):
        return lambda theta: self.log_likelihood(theta, data)

    def predictor(self, inputs):
        return lambda theta: self.predict(theta, inputs)


class _Gaussian(_Model):
    """Shared pieces of the regression models with a sampled noise sd."""

    def pointwise_loglik(self, theta, data):
        theta = _check_theta(self, theta)
        sigma = theta[-1]
        if not sigma > 0:
            return np.full(data.n, -np.inf)
        mu = self.predict(theta, data)
        return normal_logpdf(data[self.target], mu, sigma)

    def loglik_fn(self, data):
        X = self._matrix(data)
        y = np.asarray(data[self.target], dtype=float)
        n = y.shape[0]
        const = -0.5 * n * LOG_2PI

        def loglik(theta):
            sigma = theta[-1]
            if not sigma > 0:
                return -math.inf
            r = y - X @ theta[:-2] - theta[-2]
            return const - n * math.log(sigma) - 0.5 * float(r @ r) / (sigma * sigma)

        return loglik


class UnivariateLinear(_Gaussian):
    """y = alpha + beta * x + N(0, sigma^2)."""

    param_names = ("alpha", "beta", "sigma")
    positive = ("sigma",)

    def __init__(self, feature: str = "x", target: str = "y"):
        self.feature, self.target = feature, target
        self.features = (feature,)

    def _matrix(self, data):
        return _design(data, self.features)

    def predict(self, theta, inputs):
        theta = _check_theta(self, theta)
        x = np.asarray(_design(inputs, self.features)[:, 0])
        return theta[0] + theta[1] * x

    def loglik_fn(self, data):
        x = np.asarray(_design(data, self.features)[:, 0])
        y = np.asarray(data[self.target], dtype=float)
        n = y.shape[0]
        const = -0.5 * n * LOG_2PI

        def loglik(theta):
            sigma = theta[2]
            if not sigma > 0:
                return -math.inf
            r = y - theta[0] - theta[1] * x
            return const - n * math.log(sigma) - 0.5 * float(r @ r) / (sigma * sigma)

        return loglik

    def predictor(self, inputs):
        x = np.asarray(_design(inputs, self.features)[:, 0])
        return lambda theta: theta[0] + theta[1] * x


class MultivariateLinear(_Gaussian):
    """y = sum_k coef_k * x_k + b + N(0, sigma^2)."""

    positive = ("sigma",)

    def __init__(self, features: Sequence[str], target: str = "y"):
        self.features = tuple(features)
        self.target = target
        self.param_names = tuple(f"{f}_co" for f in self.features) + ("b", "sigma")

    def _matrix(self, data):
        return _design(data, self.features)

    def predict(self, theta, inputs):
        theta = _check_theta(self, theta)
        return _design(inputs, self.features) @ theta[:-2] + theta[-2]

    def predictor(self, inputs):
        X = _design(inputs, self.features)
        return lambda theta: X @ theta[:-2] + theta[-2]


class LogisticModel(_Model):
    """P(y = 1) = sigmoid(sum_k coef_k * x_k + b), Bernoulli likelihood."""

    def __init__(self, features: Sequence[str], target: str = "y"):
        self.features = tuple(features)
        self.target = target
        self.param_names = tuple(f"{f}_co" for f in self.features) + ("b",)
        self.positive = ()

    def predict(self, theta, inputs):
        theta = _check_theta(self, theta)
        return _sigmoid(_design(inputs, self.features) @ theta[:-1] + theta[-1])

    def predictor(self, inputs):
        X = _design(inputs, self.features)
        return lambda theta: _sigmoid(X @ theta[:-1] + theta[-1])

    def pointwise_loglik(self, theta, data):
        p = np.clip(self.predict(theta, data), PROB_CLAMP, 1.0 - PROB_CLAMP)
        y = data[self.target]
        return y * np.log(p) + (1.0 - y) * np.log1p(-p)

    def loglik_fn(self, data):
        X = _design(data, self.features)
        y = np.asarray(data[self.target], dtype=float)

        def loglik(theta):
            p = np.clip(_sigmoid(X @ theta[:-1] + theta[-1]), PROB_CLAMP, 1.0 - PROB_CLAMP)
            return float(y @ np.log(p) + (1.0 - y) @ np.log1p(-p))

        return loglik


def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# B-splines


def clamped_knots(lo: float, hi: float, n_interior: int, degree: int = 3) -> np.ndarray:
    """Knot vector with ``n_interior`` equispaced interior knots and
    ``degree + 1`` repeated knots at each end."""
    interior = np.linspace(lo, hi, n_interior + 2)[1:-1]
    return np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])


def bspline_basis(x, knots, degree: int = 3) -> np.ndarray:
    """B-spline basis matrix by the Cox-de Boor recursion.

    ``knots`` is the full (padded) knot vector; the result has one row per
    ``x`` and ``len(knots) - degree - 1`` columns.  The right end of the
    domain is included in the last non-degenerate interval.
    """
    t = np.asarray(knots, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.diff(t) < 0):
        raise ValueError("knot vector must be non-decreasing")
    n_basis = len(t) - degree - 1
    if n_basis < 1:
        raise ValueError("not enough knots for the requested degree")
    lo, hi = t[degree], t[-degree - 1]
    if np.any(x < lo) or np.any(x > hi):
        raise OutOfDomain(f"inputs must lie in [{lo}, {hi}]")

    m = len(t) - 1
    B = np.zeros((x.size, m))
    for j in range(m):
        if t[j] < t[j + 1]:
            B[:, j] = (t[j] <= x) & (x < t[j + 1])
    last = max(j for j in range(m) if t[j] < t[j + 1])
    B[x == t[last + 1], :] = 0.0
    B[x == t[last + 1], last] = 1.0

    for k in range(1, degree + 1):
        nxt = np.zeros((x.size, m - k))
        for j in range(m - k):
            d1 = t[j + k] - t[j]
            d2 = t[j + k + 1] - t[j + 1]
            if d1 > 0:
                nxt[:, j] += (x - t[j]) / d1 * B[:, j]
            if d2 > 0:
                nxt[:, j] += (t[j + k + 1] - x) / d2 * B[:, j + 1]
        B = nxt
    return B[:, :n_basis]


class SplineModel(_Model):
    """Independent cubic B-spline curves, one per output snapshot.

    Coefficients use the increment reparameterization
    ``a_i = a0 + sigma_a * cumsum(delta)_i``; the noise sd is fixed.
    """

    def __init__(
        self,
        knots,
        outputs: Sequence[str] = ("u1", "u2", "u3"),
        feature: str = "x",
        degree: int = 3,
        sigma: float = 0.002,
    ):
        self.knots = np.asarray(knots, dtype=float)
        self.degree = degree
        self.outputs = tuple(outputs)
        self.feature = feature
        self.sigma = float(sigma)
        self.n_basis = len(self.knots) - degree - 1
        names = []
        for out in self.outputs:
            names += [f"a0_{out}", f"sigma_a_{out}"]
            names += [f"delta_{out}_{i}" for i in range(1, self.n_basis + 1)]
        self.param_names = tuple(names)
        self.positive = tuple(f"sigma_a_{out}" for out in self.outputs)
        self._block = 2 + self.n_basis

    def basis(self, x):
        return bspline_basis(x, self.knots, self.degree)

    def coefficients(self, theta) -> np.ndarray:
        """(n_outputs, n_basis) spline coefficients."""
        t = np.asarray(theta, dtype=float).reshape(len(self.outputs), self._block)
        return t[:, :1] + t[:, 1:2] * np.cumsum(t[:, 2:], axis=1)

    def predict(self, theta, inputs):
        theta = _check_theta(self, theta)
        B = self.basis(_design(inputs, (self.feature,))[:, 0])
        A = self.coefficients(theta)
        return {out: B @ A[i] for i, out in enumerate(self.outputs)}

    def predictor(self, inputs):
        B = self.basis(_design(inputs, (self.feature,))[:, 0])
        outputs = self.outputs

        def predict(theta):
            M = B @ self.coefficients(theta).T
            return {out: M[:, i] for i, out in enumerate(outputs)}

        return predict

    def pointwise_loglik(self, theta, data):
        pred = self.predict(theta, data)
        return np.concatenate(
            [normal_logpdf(data[out], pred[out], self.sigma) for out in self.outputs]
        )

    def loglik_fn(self, data):
        B = self.basis(_design(data, (self.feature,))[:, 0])
        Y = np.column_stack([data[out] for out in self.outputs])
        n = Y.size
        const = -0.5 * n * LOG_2PI - n * math.log(self.sigma)
        inv = 0.5 / (self.sigma * self.sigma)

        def loglik(theta):
            R = Y - B @ self.coefficients(theta).T
            return const - inv * float(np.sum(R * R))

        return loglik
