import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quasimarkov.quadrature import (
    CONVERGENT,
    DIVERGENT,
    INCONCLUSIVE,
    RefinementRule,
    adaptive_gauss_legendre,
    integrate,
    tanh_sinh,
)


class TestAdaptiveGaussLegendre:
    def test_polynomial_is_exact(self):
        res = adaptive_gauss_legendre(lambda x: 3 * x**2 + 1, 0.0, 2.0)
        assert res.converged
        assert res.value == pytest.approx(10.0, abs=1e-13)

    def test_oscillatory_integrand(self):
        res = adaptive_gauss_legendre(lambda x: np.cos(50 * x), 0.0, math.pi / 2)
        assert res.value == pytest.approx(math.sin(25 * math.pi) / 50, abs=1e-12)

    def test_breakpoints_resolve_kink(self):
        res = adaptive_gauss_legendre(lambda x: np.abs(x - 0.3), 0.0, 1.0, breakpoints=[0.3])
        assert res.value == pytest.approx(0.5 * (0.3**2 + 0.7**2), abs=1e-14)

    def test_max_width_caps_panels(self):
        res = adaptive_gauss_legendre(lambda x: np.ones_like(x), 0.0, 1.0, max_width=0.1)
        assert res.panels >= 10
        assert res.value == pytest.approx(1.0, abs=1e-14)

    @given(st.floats(0.1, 5.0), st.floats(-2.0, 2.0))
    def test_exponential_matches_closed_form(self, k, a):
        res = adaptive_gauss_legendre(lambda x: np.exp(k * x), a, a + 1.0)
        exact = (math.exp(k * (a + 1.0)) - math.exp(k * a)) / k
        assert res.value == pytest.approx(exact, rel=1e-11)


class TestSingularEndpoints:
    def test_tanh_sinh_inverse_sqrt(self):
        res = tanh_sinh(lambda x: 1.0 / np.sqrt(x), 0.0, 1.0, singular_end="a", tol=1e-12)
        assert res.value == pytest.approx(2.0, abs=1e-10)

    def test_integrate_log_singularity_interior(self):
        # int_0^pi log|x - 1| dx
        res = integrate(lambda x: np.log(np.abs(x - 1.0)), 0.0, math.pi, singular_points=[1.0], tol=1e-12)
        b = math.pi - 1.0
        exact = (b * math.log(b) - b) + (-1.0)
        assert res.value == pytest.approx(exact, abs=1e-10)

    def test_strong_algebraic_pole(self):
        # int_0^1 x^(-0.9) dx = 10
        res = integrate(lambda x: x**-0.9, 0.0, 1.0, singular_points=[0.0], tol=1e-12)
        assert res.value == pytest.approx(10.0, rel=1e-8)


class TestRefinementRule:
    def test_convergent_sequence(self):
        vals = [1.0 - 2.0**-k for k in range(4, 30)]
        verdict, _ = RefinementRule().assess(vals)
        assert verdict == CONVERGENT

    def test_logarithmic_growth_diverges(self):
        vals = [float(k) for k in range(4, 21)]
        verdict, _ = RefinementRule().assess(vals)
        assert verdict == DIVERGENT

    def test_blowup_diverges(self):
        verdict, reason = RefinementRule().assess([1.0, 2.0, 1e9])
        assert verdict == DIVERGENT
        assert "1e+08" in reason or "blow" in reason

    def test_non_finite_diverges(self):
        assert RefinementRule().assess([1.0, math.inf])[0] == DIVERGENT

    def test_short_trace_is_inconclusive(self):
        assert RefinementRule().assess([1.0, 2.0])[0] == INCONCLUSIVE

    def test_oscillating_trace_is_inconclusive(self):
        vals = [1.0 + 0.1 * (-1) ** k for k in range(17)]
        assert RefinementRule().assess(vals)[0] == INCONCLUSIVE

    @given(st.floats(0.5, 50.0), st.floats(0.0, 5.0))
    def test_scale_invariance(self, scale, shift):
        # limit 1 + shift stays away from 0, where only the absolute floor applies
        base = [shift + 1.0 - 0.5**k for k in range(20)]
        v1 = RefinementRule().assess(base)[0]
        v2 = RefinementRule().assess([scale * v for v in base])[0]
        assert v1 == v2 == CONVERGENT
