import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as sp_integrate

from quasimarkov.errors import ValidationError
from quasimarkov.prediction import levinson
from quasimarkov.spectral import (
    CovarianceSequence,
    SpectralModel,
    Trilean,
    classify,
    covariance_from_spectrum,
    interpolation_variance,
    log_density_fourier,
    off_white_test,
    quasi_markov_test,
    szego_variance,
)

# sum_{k>=1} k^-b (k+n)^-b by Euler-Maclaurin in mpmath at 30 digits
POWER_LAW_COV = {
    0.75: {0: 2.6123753486854883, 1: 2.0109381287137385, 5: 1.330040373668085, 50: 0.55886708534545227},
    1.0: {0: 1.6449340668482264, 1: 1.0, 5: 0.45666666666666667, 50: 0.089984106766588501},
}
# mpmath polylog(0.75, exp(0.7i))
POLYLOG_075_AT_07 = complex(0.23279420601789151, 1.2922149032964324)

FAMILY_GRID = [SpectralModel.ar1(a) for a in (0.0, 0.3, -0.3, 0.9, -0.9)] + [
    SpectralModel.power_law(b) for b in (0.6, 0.75, 1.0)
]


class TestSpectralModel:
    def test_ar1_density(self, ar1_half):
        x = np.linspace(-math.pi, math.pi, 7)
        expected = 0.75 / (1.25 - np.cos(x))
        np.testing.assert_allclose(ar1_half.density(x), expected, rtol=1e-14)

    def test_ma1_density(self, ma1):
        x = np.array([0.0, math.pi / 2, math.pi])
        np.testing.assert_allclose(ma1.density(x), [4.0, 2.0, 0.0], atol=1e-14)

    def test_power_law_density_matches_polylog(self):
        f = SpectralModel.power_law(0.75).density(np.array([0.7, -0.7]))
        np.testing.assert_allclose(f, abs(POLYLOG_075_AT_07) ** 2, rtol=1e-12)

    def test_power_law_beta_one_closed_form(self):
        x = np.array([0.3, 1.0, 2.5])
        expected = np.log(2 * np.sin(x / 2)) ** 2 + ((math.pi - x) / 2) ** 2
        np.testing.assert_allclose(SpectralModel.power_law(1.0).density(x), expected, rtol=1e-12)

    def test_custom_table_interpolates(self):
        m = SpectralModel.custom([-math.pi, 0.0, math.pi], [2.0, 1.0, 2.0])
        assert m.density(np.array([-math.pi / 2]))[0] == pytest.approx(1.5)

    @pytest.mark.parametrize(
        "bad",
        [
            lambda: SpectralModel.ar1(1.0),
            lambda: SpectralModel.power_law(0.4),
            lambda: SpectralModel.white(-1.0),
            lambda: SpectralModel.custom([0.0, 1.0], [1.0, 1.0]),
            lambda: SpectralModel.custom([-math.pi, 0.0, math.pi], [1.0, -1.0, 1.0]),
        ],
    )
    def test_invalid_models_rejected(self, bad):
        with pytest.raises(ValidationError):
            bad()

    def test_config_round_trip(self):
        for m in FAMILY_GRID + [SpectralModel.ma1(2.0)]:
            again = SpectralModel.from_config(m.to_config())
            assert again.to_config() == m.to_config()

    def test_unknown_config_field(self):
        with pytest.raises(ValidationError):
            SpectralModel.from_config({"family": "white", "colour": "pink"})


class TestCovariance:
    def test_white(self, white):
        np.testing.assert_allclose(covariance_from_spectrum(white, 5).lags, [1, 0, 0, 0, 0, 0], atol=1e-14)

    def test_ar1_geometric(self, ar1_half):
        c = covariance_from_spectrum(ar1_half, 30).lags
        np.testing.assert_allclose(c, 0.5 ** np.arange(31), atol=1e-12)

    def test_ma1_exact(self, ma1):
        c = covariance_from_spectrum(ma1, 10, tol=1e-10).lags
        np.testing.assert_allclose(c, [2, 1] + [0] * 9, atol=1e-10)

    @pytest.mark.parametrize("beta", [0.75, 1.0])
    def test_power_law_against_frozen_oracle(self, beta):
        c = covariance_from_spectrum(SpectralModel.power_law(beta), 50).lags
        for n, want in POWER_LAW_COV[beta].items():
            assert c[n] == pytest.approx(want, rel=1e-9)

    def test_direct_quadrature_oracle_ar1(self):
        a = -0.7
        f = lambda x: (1 - a * a) / (1 + a * a - 2 * a * math.cos(x))
        want = [sp_integrate.quad(lambda x: f(x) * math.cos(n * x), -math.pi, math.pi)[0] / (2 * math.pi) for n in range(4)]
        got = covariance_from_spectrum(SpectralModel.ar1(a), 3).lags
        np.testing.assert_allclose(got, want, atol=1e-10)

    def test_atoms_add_cosines(self, white):
        m = white.with_atoms([(1.0, 0.5)], mirror=True)
        c = covariance_from_spectrum(m, 3).lags
        want = np.eye(1, 4)[0] + 2 * (0.5 / (2 * math.pi)) * np.cos(np.arange(4) * 1.0)
        np.testing.assert_allclose(c, want, atol=1e-12)

    @pytest.mark.parametrize("model", FAMILY_GRID + [SpectralModel.ma1()], ids=lambda m: m.describe())
    def test_toeplitz_positive_semidefinite(self, model):
        cov = covariance_from_spectrum(model, 64)
        for n in (1, 8, 64):
            eig = np.linalg.eigvalsh(cov.toeplitz(n))
            assert eig.min() >= -1e-8 * cov.lags[0]

    @given(st.floats(-0.95, 0.95))
    def test_ar1_any_alpha(self, a):
        c = covariance_from_spectrum(SpectralModel.ar1(a), 6).lags
        np.testing.assert_allclose(c, a ** np.arange(7), atol=1e-11)

    def test_covariance_sequence_is_read_only(self):
        cov = CovarianceSequence(np.array([1.0, 0.5]))
        with pytest.raises(ValueError):
            cov.lags[0] = 2.0


class TestSzego:
    @pytest.mark.parametrize("alpha", [0.0, 0.3, 0.5, -0.9])
    def test_ar1(self, alpha):
        assert szego_variance(SpectralModel.ar1(alpha)) == pytest.approx(1 - alpha**2, abs=1e-10)

    def test_ma1_is_one(self, ma1):
        assert szego_variance(ma1) == pytest.approx(1.0, abs=1e-8)

    def test_power_law_is_one(self, power_law_075):
        assert szego_variance(power_law_075) == pytest.approx(1.0, abs=1e-8)

    def test_vanishing_density_is_degenerate(self):
        m = SpectralModel.custom(np.linspace(-math.pi, math.pi, 9), [1, 1, 1, 0, 0, 0, 1, 1, 1])
        c = classify(m)
        assert c.sigma2 == 0.0
        assert c.degenerate and c.quasi_markov is Trilean.NO

    def test_matches_levinson_limit(self, ar1_half, white):
        for m in (ar1_half, white):
            cov = covariance_from_spectrum(m, 400)
            assert levinson(cov, 400).innovation_variance == pytest.approx(szego_variance(m), abs=1e-6)

    @given(st.floats(0.01, 100.0))
    def test_scales_linearly(self, c):
        m = SpectralModel.ar1(0.3)
        assert szego_variance(m.scaled(c)) == pytest.approx(c * szego_variance(m), rel=1e-10)


class TestQuasiMarkov:
    def test_ar1_reciprocal_integral(self, ar1_half):
        res = quasi_markov_test(ar1_half)
        assert res.verdict is Trilean.YES
        assert res.reciprocal_integral == pytest.approx(5 / 3, rel=1e-9)

    def test_ma1_diverges(self, ma1):
        res = quasi_markov_test(ma1)
        assert res.verdict is Trilean.NO
        assert res.trace.verdict == "divergent"

    def test_white_any_scale(self):
        for c in (0.1, 1.0, 7.0):
            assert quasi_markov_test(SpectralModel.white(c)).verdict is Trilean.YES

    def test_trace_is_recorded(self, ar1_half):
        res = quasi_markov_test(ar1_half)
        assert len(res.trace.levels) == len(res.trace.values) > 3

    def test_interpolation_variance(self, ar1_half, ma1, white):
        assert interpolation_variance(ar1_half) == pytest.approx(0.6, rel=1e-9)
        assert interpolation_variance(ma1) == 0.0
        assert interpolation_variance(white) == pytest.approx(1.0)

    @pytest.mark.parametrize("model", FAMILY_GRID + [SpectralModel.ma1()], ids=lambda m: m.describe())
    def test_interpolation_below_prediction(self, model):
        assert interpolation_variance(model) <= szego_variance(model) + 1e-12


class TestOffWhite:
    def test_ar1_seminorm_closed_form(self, ar1_half):
        # log f has Fourier coefficients alpha^n / n, so s = -2 log(1 - alpha^2)
        res = off_white_test(ar1_half)
        assert res.verdict is Trilean.YES
        assert res.trace.values[-1] == pytest.approx(-2 * math.log(0.75), rel=1e-8)

    def test_ar1_fourier_coefficients(self, ar1_half):
        c = log_density_fourier(ar1_half, 20)
        n = np.arange(1, 21)
        np.testing.assert_allclose(c[1:], 0.5**n / n, atol=1e-12)

    def test_ma1_diverges(self, ma1):
        assert off_white_test(ma1).verdict is Trilean.NO

    def test_power_law_diverges(self, power_law_075):
        assert off_white_test(power_law_075).verdict is Trilean.NO

    def test_stable_under_cutoff_doubling(self, ar1_half):
        base = off_white_test(ar1_half, cutoffs=[2**k for k in range(4, 12)])
        doubled = off_white_test(ar1_half, cutoffs=[2**k for k in range(5, 13)])
        assert base.verdict is doubled.verdict is Trilean.YES
        assert doubled.trace.values[-1] == pytest.approx(base.trace.values[-1], rel=1e-8)

    def test_atoms_are_not_off_white(self, white):
        assert off_white_test(white.with_atoms([(0.5, 0.1)], mirror=True)).verdict is Trilean.NO


class TestClassify:
    def test_white(self, white):
        c = classify(white)
        assert (c.ergodic, c.sigma2, c.quasi_markov, c.off_white) == (True, 1.0, Trilean.YES, Trilean.YES)

    def test_ma1(self, ma1):
        c = classify(ma1)
        assert c.ergodic and c.quasi_markov is Trilean.NO and c.off_white is Trilean.NO
        assert c.sigma2 == pytest.approx(1.0, abs=1e-4)

    def test_power_law(self, power_law_075):
        c = classify(power_law_075)
        assert c.quasi_markov is Trilean.YES and c.off_white is Trilean.NO

    def test_atoms_break_ergodicity(self, white):
        assert not classify(white.with_atoms([(1.0, 0.2)], mirror=True)).ergodic

    @pytest.mark.parametrize("model", FAMILY_GRID, ids=lambda m: m.describe())
    def test_off_white_implies_quasi_markov(self, model):
        c = classify(model)
        if c.off_white is Trilean.YES:
            assert c.quasi_markov is Trilean.YES

    @pytest.mark.parametrize("model", [SpectralModel.ar1(0.3), SpectralModel.ma1()], ids=lambda m: m.describe())
    @pytest.mark.parametrize("scale", [0.25, 3.0])
    def test_scaling_preserves_flags(self, model, scale):
        a, b = classify(model), classify(model.scaled(scale))
        assert (a.quasi_markov, a.off_white, a.degenerate, a.ergodic) == (
            b.quasi_markov, b.off_white, b.degenerate, b.ergodic,
        )
        assert b.sigma2 == pytest.approx(scale * a.sigma2, rel=1e-10)

    def test_serializes(self, ar1_half):
        d = classify(ar1_half).to_dict()
        assert d["quasi_markov"] == "yes" and d["off_white"] == "yes"
