"""Acceptance criteria, one check per criterion.

Every check prints a single ``PASS``/``FAIL``/``SKIP`` line (collected into
the pytest terminal summary) and then asserts. Tier B needs the external
106-participant CSV; point ``DISCOUNTKIT_DATA`` at it or place it at
``tests/data/cohort.csv``.
"""

import math
import time

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE_LINES, dataset_path
from discountkit.core import IndifferenceSeries, MazurParams, RachlinParams, ed50
from discountkit.dataio import read_wide_csv
from discountkit.fitting import FitConfig, fit_mazur, fit_rachlin
from discountkit.inference import (Stage2Row, pearson_cor, run_stage2, simple_linear_regression,
                                   welch_t_test)
from discountkit.metrics import auc_log, auc_raw, run_stage1, trapezoid_area
from discountkit.reference_data import REFERENCE_K, subject_1_series
from discountkit.report import plot_mosaic
from discountkit.screening import attention_check, jb_screen, screen_dataset, tabulate
from discountkit.special import normal_cdf, reg_incomplete_beta, t_cdf

NLS = FitConfig(method="nls")


def record(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def skip(number, reason):
    line = f"criterion {number:>2}: SKIP  {reason}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    pytest.skip(reason)


def close(value, target, tol):
    return abs(value - target) <= tol


def rel_close(value, target, tol):
    return abs(value - target) <= tol * abs(target)


@pytest.fixture(scope="module")
def cohort():
    path = dataset_path()
    return read_wide_csv(path) if path else None


def _require(number, data):
    if data is None:
        skip(number, "external 106-participant CSV not found (set DISCOUNTKIT_DATA)")


def _best_ms(fn, repeats=20):
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best * 1e3


class TestTierA:
    def test_criterion_1_mazur_fit(self):
        series = subject_1_series()
        parts, ok = [], True
        for name, config in (("nls", NLS), ("lsq", FitConfig())):
            fit = fit_mazur(series, config)
            ms = _best_ms(lambda: fit_mazur(series, config))
            good = (close(fit.params.k, 0.0007052959, 1e-7) and close(fit.rss, 0.2732825, 1e-6)
                    and ms < 10.0)
            ok = ok and good
            parts.append(f"{name}: k={fit.params.k:.10g} rss={fit.rss:.7g} {ms:.2f} ms")
        record(1, ok, "; ".join(parts))

    def test_criterion_2_mazur_ed50(self):
        series = subject_1_series()
        value = ed50(fit_mazur(series, NLS).params)
        exact = ed50(fit_mazur(series).params)
        record(2, close(value, 1417.845, 1e-3),
               f"ED50={value:.4f} (nls route; exact least-squares minimizer gives {exact:.4f})")

    def test_criterion_3_rachlin_fit(self):
        fit = fit_rachlin(subject_1_series())
        k, s = fit.params.k, fit.params.s
        half = ed50(fit.params)
        ok = (rel_close(k, 9.418193e-05, 1e-4) and rel_close(s, 1.277788, 1e-4)
              and close(half, 1415.088, 0.01))
        record(3, ok, f"k={k:.7g} s={s:.7g} ED50={half:.4f}")

    def test_criterion_4_auc(self):
        series = subject_1_series()
        raw, logged = auc_raw(series), auc_log(series)
        record(4, close(raw, 3100.774, 1e-3) and close(logged, 6.570705, 1e-5),
               f"AUC={raw:.4f} logAUC={logged:.7f}")

    def test_criterion_5_mean_ln_k(self):
        value = float(np.mean(np.log(REFERENCE_K)))
        record(5, len(REFERENCE_K) == 106 and close(value, -4.904101, 1e-5),
               f"n={len(REFERENCE_K)} mean ln k={value:.7f}")

    def test_criterion_6_subject_1_screen(self):
        result = jb_screen(subject_1_series())
        record(6, result.criterion1_violated and result.first_violation_index == 1,
               f"criterion1={result.criterion1_violated} at index {result.first_violation_index}"
               " (y1 -> y7)")


class TestTierB:
    def test_criterion_7_batch_k(self, cohort):
        _require(7, cohort)
        start = time.perf_counter()
        metrics = run_stage1(cohort, NLS)
        elapsed = time.perf_counter() - start
        ks = [m.mazur.params.k for m in metrics]
        worst = max(abs(a - b) / b for a, b in zip(ks, REFERENCE_K)) if len(ks) == 106 else math.inf
        record(7, len(ks) == 106 and worst <= 1e-5 and elapsed < 2.0,
               f"n={len(ks)} worst relative error={worst:.2e} runtime={elapsed:.2f} s")

    @staticmethod
    def _rows(data):
        metrics = run_stage1(data, NLS)
        return [Stage2Row(r.id, m.ln_k, r.age, r.gender, r.smoke_cigs)
                for r, m in zip(data.rows, metrics)]

    def test_criterion_8_t_tests(self, cohort):
        _require(8, cohort)
        res = run_stage2(self._rows(cohort))
        g, s = res.gender_test, res.smoker_test
        ok = g is not None and s is not None
        if ok:
            ok = (close(g.t, 0.66633, 1e-4) and close(g.df, 64.897, 1e-4) and close(g.p, 0.5076, 2e-4)
                  and close(g.ci_low, -0.6400485, 1e-4) and close(g.ci_high, 1.2809533, 1e-4)
                  and close(s.t, -0.96964, 1e-4) and close(s.df, 95.021, 1e-4)
                  and close(s.p, 0.3347, 2e-4) and close(s.ci_low, -1.4765591, 1e-4)
                  and close(s.ci_high, 0.5074967, 1e-4))
        detail = "missing test" if not (g and s) else (
            f"gender t={g.t:.5f} df={g.df:.3f} p={g.p:.4f} CI=({g.ci_low:.7f}, {g.ci_high:.7f}); "
            f"smoking t={s.t:.5f} df={s.df:.3f} p={s.p:.4f} CI=({s.ci_low:.7f}, {s.ci_high:.7f})")
        record(8, ok, detail)

    def test_criterion_9_regression(self, cohort):
        _require(9, cohort)
        r = run_stage2(self._rows(cohort)).regression
        if r is None:
            record(9, False, "regression not run")
        pairs = [(r.intercept, -4.42937), (r.slope, -0.01418), (r.se_intercept, 0.99637),
                 (r.se_slope, 0.02880), (r.residual_se, 2.567), (r.r_squared, 0.002323),
                 (r.f_statistic, 0.2422), (r.ci["intercept"][0], -6.40520508),
                 (r.ci["intercept"][1], -2.45353045), (r.ci["slope"][0], -0.07129443),
                 (r.ci["slope"][1], 0.04294416)]
        worst = max(abs(a - b) / abs(b) for a, b in pairs)
        record(9, worst <= 1e-4 and r.df_residual == 104,
               f"coef=({r.intercept:.5f}, {r.slope:.5f}) se=({r.se_intercept:.5f}, {r.se_slope:.5f}) "
               f"sigma={r.residual_se:.4f} R2={r.r_squared:.6f} F={r.f_statistic:.4f} "
               f"worst relative error={worst:.2e}")

    def test_criterion_10_correlation_and_age(self, cohort):
        _require(10, cohort)
        res = run_stage2(self._rows(cohort))
        cor, s = res.correlation, res.age_summary
        if cor is None or s is None:
            record(10, False, "correlation not computed")
        printed = (21, 28, 31, 33.49, 36, 67)
        got = (s.min, s.q1, s.median, round(s.mean, 2), s.q3, s.max)
        ok = close(cor, -0.04820073, 1e-6) and all(close(a, b, 1e-9) for a, b in zip(got, printed))
        record(10, ok, f"cor={cor:.8f} age summary={got}")

    def test_criterion_11_screening_tables(self, cohort):
        _require(11, cohort)
        rows = cohort.rows
        gender = tabulate([r.gender for r in rows])
        smoking = tabulate([r.smoke_cigs for r in rows])
        screening = screen_dataset(cohort)
        cross = screening.cross
        fails = [r.ddattend for r in rows if attention_check(r.ddattend)]
        attention = {"fail": len(fails), "pass": len(rows) - len(fails)}
        expect_cross = {(0, "fail"): 1, (0, "pass"): 81, (1, "fail"): 5, (1, "pass"): 19}
        got_cross = {}
        for jb in cross.row_levels:
            for level in cross.col_levels:
                key = (int(jb), "fail" if attention_check(level) else "pass")
                got_cross[key] = got_cross.get(key, 0) + cross.count(jb, level)
        ok = (list(gender.values()) == [27, 79] and list(smoking.values()) == [52, 54]
              and screening.jb_table == {0: 82, 1: 24} and attention == {"fail": 6, "pass": 100}
              and got_cross == expect_cross)
        record(11, ok, f"gender={gender} smoking={smoking} JBviol={screening.jb_table} "
                       f"ddattend={attention} cross={got_cross}")


class TestPropertySuites:
    def test_criterion_12_optimizer_vs_grid(self):
        rng = np.random.default_rng(20221)
        delays = oracles.DELAYS
        lo, hi = math.log(1e-9), math.log(100.0)
        worst_steps = 0.0
        at_edge = 0
        for _ in range(200):
            k = math.exp(rng.uniform(math.log(1e-6), math.log(1.0)))
            values = np.clip(1.0 / (1.0 + k * delays) + rng.normal(0, 0.05, delays.size), 0, 1)
            series = IndifferenceSeries(tuple(delays), tuple(values))
            fit = fit_mazur(series)
            grid_t, step = oracles.mazur_grid_argmin(delays, values, lo=lo, hi=hi)
            fitted_t = math.log(fit.params.k) if fit.params.k > 0 else -math.inf
            if grid_t <= lo or grid_t >= hi:
                # the minimizer lies outside the grid: the fit must sit beyond that edge too
                at_edge += 1
                beyond = fitted_t <= lo + step if grid_t <= lo else fitted_t >= hi - step
                worst_steps = max(worst_steps, 0.0 if beyond else math.inf)
            else:
                worst_steps = max(worst_steps, abs(fitted_t - grid_t) / step)
        record(12, worst_steps <= 1.0,
               f"200 series ({at_edge} with the minimizer beyond the grid edge), "
               f"worst distance {worst_steps:.3f} grid steps")

    def test_criterion_13_exact_recovery(self):
        rng = np.random.default_rng(7)
        delays = tuple(oracles.DELAYS)
        worst_m = worst_r = 0.0
        for _ in range(25):
            k = math.exp(rng.uniform(math.log(1e-5), math.log(0.5)))
            s = rng.uniform(0.4, 1.6)
            m_series = IndifferenceSeries(delays, tuple(1.0 / (1.0 + k * d) for d in delays))
            r_series = IndifferenceSeries(delays, tuple(1.0 / (1.0 + k * d ** s) for d in delays))
            worst_m = max(worst_m, abs(fit_mazur(m_series).params.k - k) / k)
            rf = fit_rachlin(r_series).params
            worst_r = max(worst_r, abs(rf.k - k) / k, abs(rf.s - s) / s)
        record(13, worst_m <= 1e-7 and worst_r <= 1e-6,
               f"worst relative error Mazur={worst_m:.2e} Rachlin={worst_r:.2e}")

    def test_criterion_14_special_functions(self):
        rng = np.random.default_rng(14)
        worst = 0.0
        for _ in range(500):
            x, a, b = rng.uniform(0, 1), math.exp(rng.uniform(-2, 5)), math.exp(rng.uniform(-2, 5))
            worst = max(worst, abs(reg_incomplete_beta(x, a, b) - (1 - reg_incomplete_beta(1 - x, b, a))))
        zero_ok = all(t_cdf(0.0, df) == 0.5 for df in (0.5, 1, 3.7, 30, 1e6))
        normal_gap = max(abs(t_cdf(x, df) - normal_cdf(x))
                         for df in (1e6, 1e7, 1e8) for x in np.linspace(-6, 6, 121))
        record(14, worst <= 1e-12 and zero_ok and normal_gap <= 1e-6,
               f"symmetry gap={worst:.1e} t_cdf(0)=0.5 exact: {zero_ok} "
               f"large-df normal gap={normal_gap:.1e}")

    def test_criterion_15_regression_identities(self):
        rng = np.random.default_rng(15)
        worst_sum = worst_r2 = worst_f = 0.0
        antisymmetric = True
        for _ in range(100):
            n = int(rng.integers(5, 200))
            scale = 10 ** rng.uniform(-3, 3)
            x = rng.normal(0, scale, n)
            y = 3 + rng.normal(0, 1) * x + rng.normal(0, scale, n)
            r = simple_linear_regression(x, y)
            worst_sum = max(worst_sum, abs(sum(r.residuals)) / (n * scale))
            rho = pearson_cor(x, y)
            worst_r2 = max(worst_r2, abs(r.r_squared - rho * rho) / (rho * rho))
            worst_f = max(worst_f, abs(r.f_statistic - r.t_slope ** 2) / r.t_slope ** 2)
            a, b = rng.normal(0, 1, n), rng.normal(0.3, 2, n + 3)
            ab, ba = welch_t_test(a, b), welch_t_test(b, a)
            antisymmetric = antisymmetric and (ab.t == -ba.t and ab.df == ba.df and ab.p == ba.p
                                               and ab.ci_low == -ba.ci_high
                                               and ab.ci_high == -ba.ci_low)
        record(15, worst_sum <= 1e-9 and worst_r2 <= 1e-9 and worst_f <= 1e-9 and antisymmetric,
               f"residual sum={worst_sum:.1e} R2 vs r^2={worst_r2:.1e} F vs t^2={worst_f:.1e} "
               f"Welch swap exact={antisymmetric}")

    def test_criterion_16_trapezoid_and_mosaic(self):
        rng = np.random.default_rng(16)
        worst_split = 0.0
        for _ in range(500):
            n = int(rng.integers(2, 12))
            xs = np.cumsum(rng.uniform(0.01, 1.0, n))
            ys = rng.uniform(0, 1, n)
            i = int(rng.integers(0, n - 1))
            frac = rng.uniform(0.05, 0.95)
            xm = xs[i] + frac * (xs[i + 1] - xs[i])
            ym = ys[i] + (xm - xs[i]) / (xs[i + 1] - xs[i]) * (ys[i + 1] - ys[i])
            split = trapezoid_area(list(np.insert(xs, i + 1, xm)), list(np.insert(ys, i + 1, ym)))
            worst_split = max(worst_split, abs(split - trapezoid_area(list(xs), list(ys))))
        worst_area = 0.0
        for _ in range(200):
            r, c = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            table = rng.integers(0, 30, (r, c))
            if table.sum() == 0:
                continue
            spec = plot_mosaic([f"r{i}" for i in range(r)], [f"c{j}" for j in range(c)], table)
            rects = spec.layers[0].rects
            labels = spec.layers[0].rect_labels
            for (x0, y0, x1, y1), label in zip(rects, labels):
                ri, cj = (int(part[1:]) for part in label.split(" / "))
                worst_area = max(worst_area, abs((x1 - x0) * (y1 - y0) - table[ri, cj] / table.sum()))
            if len(rects) != int(np.count_nonzero(table)):
                worst_area = math.inf
        record(16, worst_split <= 1e-12 and worst_area <= 1e-6,
               f"split-additivity gap={worst_split:.1e} mosaic area gap={worst_area:.1e}")
