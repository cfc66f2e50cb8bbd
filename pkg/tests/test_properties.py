import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from discountkit.core import DEFAULT_DELAYS, IndifferenceSeries, MazurParams, ed50, predict
from discountkit.inference import pearson_cor, simple_linear_regression, welch_t_test
from discountkit.metrics import auc_raw, trapezoid_area
from discountkit.report import plot_mosaic
from discountkit.screening import jb_screen
from discountkit.special import reg_incomplete_beta

unit = st.floats(0.0, 1.0, allow_nan=False)
seven_values = st.lists(unit, min_size=7, max_size=7)


@given(seven_values)
def test_jb_screen_matches_literal_rules(values):
    r = jb_screen(IndifferenceSeries.from_values(values))
    assert (r.criterion1_violated, r.criterion2_violated) == oracles.jb_direct(values)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=20), st.data())
def test_trapezoid_split_additivity(ys, data):
    xs = list(np.cumsum(np.linspace(0.5, 1.5, len(ys))))
    split = data.draw(st.integers(1, len(ys) - 2))
    whole = trapezoid_area(xs, ys)
    parts = trapezoid_area(xs[:split + 1], ys[:split + 1]) + trapezoid_area(xs[split:], ys[split:])
    assert parts == pytest.approx(whole, abs=1e-12 * max(1.0, sum(abs(y) for y in ys) * 3))


@given(seven_values, st.integers(0, 6), st.floats(1e-6, 0.5))
def test_auc_monotone(values, index, bump):
    raised = list(values)
    raised[index] = min(1.0, raised[index] + bump)
    assert auc_raw(IndifferenceSeries.from_values(raised)) >= auc_raw(IndifferenceSeries.from_values(values))


@given(st.floats(-20, 5), st.floats(0.01, 3))
def test_mazur_ed50_halves(lnk, gap):
    lo, hi = MazurParams(math.exp(lnk)), MazurParams(math.exp(lnk + gap))
    assert predict(lo, ed50(lo)) == pytest.approx(0.5, abs=1e-9)
    assert ed50(hi) < ed50(lo)


@given(st.floats(1e-3, 0.999), st.floats(0.1, 50), st.floats(0.1, 50))
def test_incomplete_beta_symmetry(x, a, b):
    assert reg_incomplete_beta(x, a, b) + reg_incomplete_beta(1 - x, b, a) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1))
def test_regression_identities(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(18, 70, 30)
    y = rng.normal(-5, 2.5, 30) + rng.normal(0, 0.05) * x
    r = simple_linear_regression(x, y)
    assert r.r_squared == pytest.approx(pearson_cor(x, y) ** 2, rel=1e-10)
    assert r.f_statistic == pytest.approx(r.t_slope ** 2, rel=1e-9)
    assert abs(sum(r.residuals)) <= 1e-9 * 30 * max(1.0, float(np.max(np.abs(y))))


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1))
def test_welch_antisymmetry(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(0, 1, 12), rng.normal(0.5, 2, 17)
    ab, ba = welch_t_test(a, b), welch_t_test(b, a)
    assert ab.t == -ba.t and ab.df == ba.df and ab.p == ba.p
    assert (ab.ci_low, ab.ci_high) == (-ba.ci_high, -ba.ci_low)


@given(st.lists(st.lists(st.integers(0, 50), min_size=3, max_size=3), min_size=2, max_size=4))
def test_mosaic_area_proportional(counts):
    total = sum(map(sum, counts))
    if total == 0:
        return
    rows = [str(i) for i in range(len(counts))]
    spec = plot_mosaic(rows, ["a", "b", "c"], counts)
    layer = spec.layers[0]
    areas = dict(zip(layer.rect_labels, [(x1 - x0) * (y1 - y0) for x0, y0, x1, y1 in layer.rects]))
    for i, row in enumerate(counts):
        for j, c in enumerate(row):
            if c:
                assert areas[f"{i} / {'abc'[j]}"] == pytest.approx(c / total, abs=1e-6)


def test_default_schedule_is_increasing():
    assert list(DEFAULT_DELAYS) == sorted(DEFAULT_DELAYS)
