"""Quadrature engine against integrands with known closed forms."""

import math

import numpy as np
import pytest
from scipy.integrate import quad as scipy_quad

from smallcell.quadrature import (
    QuadratureSpec,
    integrate_2d,
    integrate_finite,
    integrate_semi_infinite,
)


def erf_series(x: float) -> float:
    # 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1)); fine for |x| <= 2
    total = 0.0
    term = x
    n = 0
    while abs(term) > 1e-18:
        total += term / (2 * n + 1)
        n += 1
        term *= -x * x / n
    return 2.0 / math.sqrt(math.pi) * total


class TestFinite:
    def test_constant(self):
        res = integrate_finite(lambda x: np.ones_like(x), 0.0, 2.0 * math.pi)
        assert res.converged
        assert res.value == pytest.approx(2.0 * math.pi, abs=1e-12)

    def test_sin(self):
        res = integrate_finite(np.sin, 0.0, math.pi)
        assert res.value == pytest.approx(2.0, abs=1e-12)

    def test_gaussian_vs_erf_series(self):
        # int_0^1 e^(-x^2) = sqrt(pi)/2 erf(1), erf from its power series
        res = integrate_finite(lambda x: np.exp(-x * x), 0.0, 1.0)
        assert res.value == pytest.approx(math.sqrt(math.pi) / 2 * erf_series(1.0), abs=1e-12)

    def test_gaussian_long_range(self):
        # the [0, 6] tail beyond sqrt(pi)/2 is below 2e-17
        res = integrate_finite(lambda x: np.exp(-x * x), 0.0, 6.0)
        assert res.value == pytest.approx(0.8862269254527580, abs=1e-10)

    def test_bad_interval_rejected(self):
        with pytest.raises(ValueError):
            integrate_finite(np.sin, 1.0, 1.0)
        with pytest.raises(ValueError):
            integrate_finite(np.sin, 0.0, math.inf)

    def test_vector_components(self):
        res = integrate_finite(lambda x: np.stack([x, x * x], axis=1), 0.0, 1.0)
        assert res.converged
        np.testing.assert_allclose(res.value, [0.5, 1.0 / 3.0], atol=1e-12)


class TestSemiInfinite:
    def test_rayleigh_normalization(self):
        lam = 1.0 / (800.0**2 * math.pi)

        def f(r):
            return 2.0 * math.pi * lam * r * np.exp(-math.pi * lam * r * r)

        res = integrate_semi_infinite(f, 0.0, "exp_quadratic")
        assert res.converged
        assert res.value == pytest.approx(1.0, abs=1e-9)

    def test_exponential(self):
        res = integrate_semi_infinite(lambda x: np.exp(-x), 0.0, "exp_linear")
        assert res.value == pytest.approx(1.0, abs=1e-9)

    def test_power_tail(self):
        res = integrate_semi_infinite(lambda x: x**-3.0, 1.0, "power")
        assert res.value == pytest.approx(0.5, abs=1e-9)

    def test_unknown_hint(self):
        with pytest.raises(ValueError):
            integrate_semi_infinite(np.exp, 0.0, "nope")

    def test_explicit_scale_matches_auto(self):
        f = lambda x: np.exp(-x / 37.0)
        auto = integrate_semi_infinite(f, 0.0, "exp_linear")
        manual = integrate_semi_infinite(f, 0.0, "exp_linear", scale=37.0)
        assert auto.value == pytest.approx(manual.value, rel=1e-9)
        assert manual.value == pytest.approx(37.0, rel=1e-9)


class TestIterated2D:
    def test_unit_square(self):
        res = integrate_2d(lambda x, y: np.ones_like(y), 0.0, 1.0, 0.0, 1.0)
        assert res.value == pytest.approx(1.0, abs=1e-10)

    def test_product(self):
        res = integrate_2d(lambda x, y: x * y, 0.0, 1.0, 0.0, 1.0)
        assert res.value == pytest.approx(0.25, abs=1e-10)

    def test_polar_gaussian(self):
        # int_0^2pi int_0^inf r e^(-r^2) dr dtheta = pi
        res = integrate_2d(
            lambda th, r: r * np.exp(-r * r),
            0.0,
            2.0 * math.pi,
            0.0,
            math.inf,
            inner_decay="exp_quadratic",
        )
        assert res.value == pytest.approx(math.pi, abs=1e-8)

    def test_x_dependent_inner_bound(self):
        # int_0^1 int_0^x 1 dy dx = 1/2
        res = integrate_2d(lambda x, y: np.ones_like(y), 0.0, 1.0, 0.0, lambda x: x)
        assert res.value == pytest.approx(0.5, abs=1e-9)


class TestContracts:
    def test_determinism(self):
        f = lambda x: np.sin(3.0 * x) ** 2 / (1.0 + x)
        a = integrate_finite(f, 0.0, 9.0)
        b = integrate_finite(f, 0.0, 9.0)
        assert a.value == b.value
        assert a.evals == b.evals
        assert a.error_estimate == b.error_estimate

    def test_linearity(self):
        f = lambda x: np.exp(-x) * np.sin(x)
        g = lambda x: 1.0 / (1.0 + x * x)
        a, b = 2.5, -1.25
        combined = integrate_finite(lambda x: a * f(x) + b * g(x), 0.0, 4.0)
        separate = a * integrate_finite(f, 0.0, 4.0).value + b * integrate_finite(g, 0.0, 4.0).value
        assert combined.value == pytest.approx(separate, abs=1e-9)

    def test_budget_exhaustion_flagged(self):
        spec = QuadratureSpec(abs_tol=1e-14, rel_tol=1e-14, max_evals=120)
        res = integrate_finite(lambda x: np.abs(x - 1 / math.pi) ** 0.1, 0.0, 1.0, spec)
        assert not res.converged
        assert np.isfinite(res.value)

    def test_error_honesty(self):
        cases = [
            (lambda x: x**3, 0.0, 1.0, 0.25),
            (np.sin, 0.0, math.pi, 2.0),
            (np.exp, 0.0, 1.0, math.e - 1.0),
            (lambda x: 1.0 / (1.0 + x * x), 0.0, 1.0, math.pi / 4.0),
            (np.sqrt, 0.0, 1.0, 2.0 / 3.0),
            (lambda x: np.cos(x) ** 2, 0.0, 2.0 * math.pi, math.pi),
            (lambda x: -np.log(x), 0.0, 1.0, 1.0),
        ]
        for f, a, b, truth in cases:
            res = integrate_finite(f, a, b)
            assert res.converged, f"{f} did not converge"
            assert abs(res.value - truth) <= max(3.0 * res.error_estimate, 1e-12)
        semi = [
            (lambda x: np.exp(-x), 0.0, "exp_linear", 1.0),
            (lambda x: x**-2.0, 1.0, "power", 1.0),
            (lambda x: x * np.exp(-x * x), 0.0, "exp_quadratic", 0.5),
        ]
        for f, a, hint, truth in semi:
            res = integrate_semi_infinite(f, a, hint)
            assert res.converged
            assert abs(res.value - truth) <= max(3.0 * res.error_estimate, 1e-12)

    def test_against_scipy_quad(self):
        f = lambda x: np.exp(-0.5 * x) * np.cos(2.0 * x)
        mine = integrate_finite(f, 0.0, 10.0)
        ref, _ = scipy_quad(lambda x: math.exp(-0.5 * x) * math.cos(2.0 * x), 0.0, 10.0)
        assert mine.value == pytest.approx(ref, abs=1e-10)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            QuadratureSpec(abs_tol=0.0, rel_tol=0.0)
        with pytest.raises(ValueError):
            QuadratureSpec(max_evals=10)
