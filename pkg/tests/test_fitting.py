import math

import numpy as np
import pytest

import oracles
from discountkit.core import IndifferenceSeries, MazurParams, RachlinParams, ed50
from discountkit.fitting import (FitConfig, NonFiniteObjectiveError, fit_mazur, fit_model,
                                 fit_rachlin, gauss_newton, minimize_1d, minimize_simplex, rss,
                                 rss_curve)


def series_of(values, delays=tuple(oracles.DELAYS)):
    return IndifferenceSeries(tuple(delays), tuple(values))


class TestMinimize1d:
    def test_quadratic(self):
        x, fx = minimize_1d(lambda t: (t - 1.234) ** 2 + 3.0, (-10.0, 10.0))
        # function values alone pin the abscissa only to about sqrt(eps)
        assert x == pytest.approx(1.234, abs=1e-7)
        assert fx == pytest.approx(3.0)

    def test_non_smooth(self):
        x, _ = minimize_1d(lambda t: abs(t + 0.5), (-3.0, 2.0))
        assert x == pytest.approx(-0.5, abs=1e-8)

    def test_cosine_minimum_at_pi(self):
        x, _ = minimize_1d(math.cos, (2.0, 4.0))
        assert x == pytest.approx(math.pi, abs=1e-7)

    def test_rejects_bad_bracket(self):
        with pytest.raises(ValueError):
            minimize_1d(lambda t: t * t, (1.0, -1.0))

    def test_non_finite_objective_names_parameter(self):
        with pytest.raises(NonFiniteObjectiveError, match="parameter value"):
            minimize_1d(lambda t: math.nan, (0.0, 1.0))


class TestSimplex:
    def test_rosenbrock(self):
        def rosen(p):
            return (1 - p[0]) ** 2 + 100 * (p[1] - p[0] ** 2) ** 2

        res = minimize_simplex(rosen, [-1.2, 1.0], FitConfig(max_iterations=5000))
        assert res.converged
        assert res.x == pytest.approx((1.0, 1.0), abs=1e-4)

    def test_iteration_cap_reports_unconverged(self):
        res = minimize_simplex(lambda p: float(p @ p), [3.0, 4.0], FitConfig(max_iterations=3))
        assert not res.converged
        assert res.iterations == 3

    def test_quadratic_bowl(self):
        res = minimize_simplex(lambda p: (p[0] - 2) ** 2 + 5 * (p[1] + 1) ** 2, [0.0, 0.0])
        assert res.x == pytest.approx((2.0, -1.0), abs=1e-5)


class TestGaussNewton:
    def test_linear_model_one_step(self):
        x = np.linspace(0, 1, 20)
        y = 2.0 + 3.0 * x + np.sin(7 * x) * 0.01

        def model(p):
            return p[0] + p[1] * x

        res = gauss_newton(model, y, [0.5, 0.5])
        ols = np.polyfit(x, y, 1)
        assert res.converged
        assert res.params == pytest.approx((ols[1], ols[0]), rel=1e-6)

    def test_zero_residual_data_does_not_converge(self):
        # the relative-offset criterion is 0/0 on a perfect fit, as in nls
        series = series_of([1.0 / (1.0 + 0.01 * d) for d in oracles.DELAYS])
        fit = fit_mazur(series, FitConfig(method="nls"))
        assert not fit.converged


class TestFitMazur:
    def test_subject_1_matches_high_precision_minimizer(self, subject1):
        k_mp, rss_mp = oracles.mazur_lsq_mp(oracles.DELAYS, oracles.SUBJECT_1, 7e-4)
        fit = fit_mazur(subject1)
        assert fit.params.k == pytest.approx(float(k_mp), rel=1e-8)
        assert fit.rss == pytest.approx(float(rss_mp), rel=1e-12)

    def test_subject_1_nls_route_reproduces_printed_output(self, subject1):
        fit = fit_mazur(subject1, FitConfig(method="nls"))
        assert fit.converged
        assert fit.params.k == pytest.approx(0.0007052959, abs=1e-10)
        assert ed50(fit.params) == pytest.approx(1417.845, abs=1e-3)
        assert fit.rss == pytest.approx(0.2733, abs=5e-5)
        # printed "Achieved convergence tolerance: 2.116e-06"
        assert fit.tolerance_achieved == pytest.approx(2.116e-06, rel=2e-3)

    def test_noiseless_recovery(self):
        for k in (1e-5, 3e-3, 0.2):
            series = series_of([1.0 / (1.0 + k * d) for d in oracles.DELAYS])
            assert fit_mazur(series).params.k == pytest.approx(k, rel=1e-9)

    def test_flat_series_gives_zero_rate(self):
        fit = fit_mazur(series_of([1.0] * 7))
        assert fit.params.k == 0.0
        assert "boundary" in fit.message

    def test_increasing_series_still_beats_zero_rate(self):
        # the RSS slope at k = 0 is negative unless every value equals 1
        series = series_of([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7])
        fit = fit_mazur(series)
        assert fit.params.k > 0
        assert fit.rss < rss(series, MazurParams(0.0))

    def test_rss_recomputed_at_estimate(self, subject1):
        fit = fit_mazur(subject1)
        assert fit.rss == rss(subject1, fit.params)

    def test_matches_grid_oracle_on_random_series(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            k = math.exp(rng.uniform(-10, -1))
            values = np.clip(1 / (1 + k * oracles.DELAYS) + rng.normal(0, 0.05, 7), 0, 1)
            grid_t, step = oracles.mazur_grid_argmin(oracles.DELAYS, values, n=200_000)
            fit = fit_mazur(series_of(values))
            assert math.log(fit.params.k) == pytest.approx(grid_t, abs=step)

    def test_deterministic(self, subject1):
        assert fit_mazur(subject1) == fit_mazur(subject1)


class TestFitRachlin:
    def test_subject_1(self, subject1):
        fit = fit_rachlin(subject1)
        assert fit.params.k == pytest.approx(9.418193e-05, rel=1e-4)
        assert fit.params.s == pytest.approx(1.277788, rel=1e-4)
        assert ed50(fit.params) == pytest.approx(1415.088, abs=0.01)

    def test_never_worse_than_mazur(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            values = rng.uniform(0, 1, 7)
            series = series_of(values)
            assert fit_rachlin(series).rss <= fit_mazur(series).rss * (1 + 1e-12)

    def test_noiseless_recovery(self):
        k, s = 2e-3, 0.7
        series = series_of([1.0 / (1.0 + k * d ** s) for d in oracles.DELAYS])
        fit = fit_rachlin(series)
        assert fit.params.k == pytest.approx(k, rel=1e-6)
        assert fit.params.s == pytest.approx(s, rel=1e-6)

    def test_rachlin_params_type(self, subject1):
        assert isinstance(fit_model(subject1, "rachlin").params, RachlinParams)


def test_unknown_model():
    with pytest.raises(ValueError):
        fit_model(series_of([1, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4]), "exponential")


def test_unknown_method():
    with pytest.raises(ValueError, match="fit method"):
        FitConfig(method="magic")


def test_rss_curve_minimum_near_estimate(subject1):
    ks = np.exp(np.linspace(math.log(1e-4), math.log(1e-2), 401))
    trace = rss_curve(subject1, ks)
    best = min(trace.points, key=lambda p: p[1])
    assert best[0][0] == pytest.approx(fit_mazur(subject1).params.k, rel=0.02)


def test_rss_at_k_zero(subject1):
    expected = sum((y - 1) ** 2 for y in oracles.SUBJECT_1)
    assert rss(subject1, MazurParams(0.0)) == pytest.approx(expected)
