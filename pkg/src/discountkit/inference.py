"""Stage-2 statistics on per-participant metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .special import f_sf, t_ppf, t_two_sided_p


class UndefinedValueError(ValueError):
    """An input holds an undefined value (e.g. ln k of a zero rate)."""


class UndefinedCorrelationError(ValueError):
    """Correlation is undefined because an input has zero variance."""


def finite_array(values: Sequence[Optional[float]], name: str = "values") -> np.ndarray:
    bad = [i for i, v in enumerate(values) if v is None or not math.isfinite(float(v))]
    if bad:
        raise UndefinedValueError(
            f"{name} has undefined entries at positions {bad[:10]}"
            + (" ..." if len(bad) > 10 else ""))
    return np.asarray(values, dtype=float)


def quantile(values: Sequence[float], prob: float) -> float:
    """Sample quantile by linear interpolation between order statistics (type 7)."""
    ordered = sorted(float(v) for v in values)
    if not ordered:
        raise ValueError("quantile of an empty sample")
    h = (len(ordered) - 1) * prob
    lo = math.floor(h)
    hi = min(lo + 1, len(ordered) - 1)
    return ordered[lo] + (h - lo) * (ordered[hi] - ordered[lo])


@dataclass(frozen=True)
class SummaryStats:
    n: int
    mean: float
    sd: float
    min: float
    q1: float
    median: float
    q3: float
    max: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(values: Sequence[float]) -> SummaryStats:
    x = finite_array(values)
    if x.size == 0:
        raise ValueError("cannot summarize an empty sample")
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return SummaryStats(
        n=int(x.size), mean=float(np.mean(x)), sd=sd, min=float(x.min()),
        q1=quantile(x, 0.25), median=quantile(x, 0.5), q3=quantile(x, 0.75),
        max=float(x.max()), degenerate=x.size == 1)


def pearson_cor(x: Sequence[float], y: Sequence[float]) -> float:
    a, b = finite_array(x, "x"), finite_array(y, "y")
    if a.size != b.size:
        raise ValueError(f"length mismatch ({a.size} vs {b.size})")
    if a.size < 2:
        raise ValueError("correlation needs at least two pairs")
    da, db = a - a.mean(), b - b.mean()
    saa, sbb = float(da @ da), float(db @ db)
    if saa == 0 or sbb == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant vector")
    r = float(da @ db) / math.sqrt(saa * sbb)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p: float
    ci_low: float
    ci_high: float
    mean_a: float
    mean_b: float
    group_labels: Tuple[str, str]
    n_a: int = 0
    n_b: int = 0
    confidence: float = 0.95

    def to_dict(self) -> dict:
        out = asdict(self)
        out["group_labels"] = list(self.group_labels)
        return out


def welch_t_test(a: Sequence[float], b: Sequence[float], confidence: float = 0.95,
                 labels: Tuple[str, str] = ("a", "b")) -> TTestResult:
    """Two-sided Welch two-sample t-test for the difference ``mean(a) - mean(b)``."""
    x, y = finite_array(a, "group a"), finite_array(b, "group b")
    if x.size < 2 or y.size < 2:
        raise ValueError(f"each group needs at least 2 observations (got {x.size} and {y.size})")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    va = float(np.var(x, ddof=1)) / x.size
    vb = float(np.var(y, ddof=1)) / y.size
    se2 = va + vb
    if se2 == 0:
        raise ValueError("both groups have zero variance")
    mean_a, mean_b = float(np.mean(x)), float(np.mean(y))
    diff = mean_a - mean_b
    se = math.sqrt(se2)
    t = diff / se
    df = se2 * se2 / (va * va / (x.size - 1) + vb * vb / (y.size - 1))
    half = t_ppf(1.0 - (1.0 - confidence) / 2.0, df) * se
    return TTestResult(t=t, df=df, p=t_two_sided_p(t, df), ci_low=diff - half,
                       ci_high=diff + half, mean_a=mean_a, mean_b=mean_b,
                       group_labels=(str(labels[0]), str(labels[1])),
                       n_a=int(x.size), n_b=int(y.size), confidence=confidence)


@dataclass(frozen=True)
class RegressionResult:
    intercept: float
    slope: float
    se_intercept: float
    se_slope: float
    t_intercept: float
    t_slope: float
    p_intercept: float
    p_slope: float
    r_squared: float
    adj_r_squared: float
    residual_se: float
    df_residual: int
    f_statistic: float
    f_p_value: float
    ci: Dict[str, Tuple[float, float]]
    fitted: Tuple[float, ...]
    residuals: Tuple[float, ...]
    confidence: float = 0.95

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ci"] = {k: list(v) for k, v in self.ci.items()}
        out["fitted"] = list(self.fitted)
        out["residuals"] = list(self.residuals)
        return out


def simple_linear_regression(x: Sequence[float], y: Sequence[float],
                             confidence: float = 0.95) -> RegressionResult:
    """Ordinary least squares fit of ``y = intercept + slope * x``."""
    xs, ys = finite_array(x, "x"), finite_array(y, "y")
    if xs.size != ys.size:
        raise ValueError(f"length mismatch ({xs.size} vs {ys.size})")
    n = xs.size
    if n < 3:
        raise ValueError("simple regression needs at least 3 observations")
    x_mean, y_mean = float(xs.mean()), float(ys.mean())
    dx = xs - x_mean
    sxx = float(dx @ dx)
    if sxx == 0:
        raise ValueError("predictor is constant; slope is not estimable")
    slope = float(dx @ (ys - y_mean)) / sxx
    intercept = y_mean - slope * x_mean
    fitted = intercept + slope * xs
    resid = ys - fitted
    df = n - 2
    rss = float(resid @ resid)
    mss = slope * slope * sxx
    sigma2 = rss / df
    sigma = math.sqrt(sigma2)
    se_slope = math.sqrt(sigma2 / sxx)
    se_intercept = math.sqrt(sigma2 * (1.0 / n + x_mean * x_mean / sxx))
    r_squared = mss / (mss + rss) if mss + rss > 0 else math.nan
    adj = 1.0 - (1.0 - r_squared) * (n - 1) / df

    def tstat(est: float, se: float) -> float:
        if se == 0:
            return math.copysign(math.inf, est) if est != 0 else math.nan
        return est / se

    t_int, t_slope = tstat(intercept, se_intercept), tstat(slope, se_slope)
    if sigma2 > 0:
        f = mss / sigma2
        f_p = f_sf(f, 1.0, df)
    else:
        f, f_p = math.inf, 0.0
    q = t_ppf(1.0 - (1.0 - confidence) / 2.0, df)

    def p_of(t: float) -> float:
        return math.nan if math.isnan(t) else t_two_sided_p(t, df)

    return RegressionResult(
        intercept=intercept, slope=slope, se_intercept=se_intercept, se_slope=se_slope,
        t_intercept=t_int, t_slope=t_slope, p_intercept=p_of(t_int), p_slope=p_of(t_slope),
        r_squared=r_squared, adj_r_squared=adj, residual_se=sigma, df_residual=df,
        f_statistic=f, f_p_value=f_p,
        ci={"intercept": (intercept - q * se_intercept, intercept + q * se_intercept),
            "slope": (slope - q * se_slope, slope + q * se_slope)},
        fitted=tuple(fitted.tolist()), residuals=tuple(resid.tolist()),
        confidence=confidence)


def sturges_bins(n: int) -> int:
    return int(math.ceil(math.log2(n))) + 1 if n > 0 else 1


def pretty_breaks(lo: float, hi: float, n: int) -> List[float]:
    """Equally spaced round-number breaks covering ``[lo, hi]``, about ``n`` cells.

    The cell width is 1, 2, 5 or 10 times a power of ten, chosen with the
    same bias toward wider cells as R's ``pretty``; ``n`` is a suggestion.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise ValueError(f"invalid range [{lo}, {hi}]")
    n = max(int(n), 1)
    if hi == lo:
        unit = 10.0 ** math.floor(math.log10(abs(lo))) if lo != 0 else 1.0
        return [lo - unit / 2.0, lo + unit / 2.0]
    cell = (hi - lo) / n
    base = 10.0 ** math.floor(math.log10(cell))
    unit = base
    h, h5 = 1.5, 0.5 + 1.5 * 1.5
    if 2 * base - cell < h * (cell - unit):
        unit = 2 * base
        if 5 * base - cell < h5 * (cell - unit):
            unit = 5 * base
            if 10 * base - cell < h * (cell - unit):
                unit = 10 * base
    start = math.floor(lo / unit + 1e-7)
    stop = math.ceil(hi / unit - 1e-7)
    return [i * unit for i in range(start, stop + 1)]


def histogram_bins(values: Sequence[float], bins: Optional[int] = None) -> Tuple[List[float], List[int]]:
    """Pretty equal-width edges and counts; bins are right-closed, the first also left-closed."""
    x = finite_array(values)
    if x.size == 0:
        raise ValueError("histogram of an empty sample")
    edges = pretty_breaks(float(x.min()), float(x.max()), bins or sturges_bins(int(x.size)))
    counts = [0] * (len(edges) - 1)
    for v in x:
        i = int(np.searchsorted(edges, v, side="left")) - 1
        counts[min(max(i, 0), len(counts) - 1)] += 1
    return edges, counts


@dataclass(frozen=True)
class ResidualDiagnostics:
    fitted: Tuple[float, ...]
    residuals: Tuple[float, ...]
    residual_summary: SummaryStats
    histogram_edges: Tuple[float, ...]
    histogram_counts: Tuple[int, ...]
    pairs: Tuple[Tuple[float, float], ...]


def residual_diagnostics(result: RegressionResult, bins: Optional[int] = None) -> ResidualDiagnostics:
    edges, counts = histogram_bins(result.residuals, bins)
    return ResidualDiagnostics(
        fitted=result.fitted, residuals=result.residuals,
        residual_summary=summarize(result.residuals),
        histogram_edges=tuple(edges), histogram_counts=tuple(counts),
        pairs=tuple(zip(result.fitted, result.residuals)))


@dataclass(frozen=True)
class Stage2Row:
    id: str
    ln_k: Optional[float]
    age: Optional[float] = None
    gender: Optional[str] = None
    smoker: Optional[str] = None


@dataclass(frozen=True)
class Stage2Results:
    n_rows: int
    n_used: int
    undefined_ln_k: Tuple[str, ...]
    ln_k_summary: Optional[SummaryStats]
    age_summary: Optional[SummaryStats]
    gender_counts: Dict[str, int]
    smoker_counts: Dict[str, int]
    gender_test: Optional[TTestResult]
    smoker_test: Optional[TTestResult]
    regression: Optional[RegressionResult]
    correlation: Optional[float]
    notices: Tuple[str, ...]


def _counts(labels: Sequence[Optional[str]]) -> Dict[str, int]:
    out: Dict[str, int] = {}
    for label in sorted({x for x in labels if x is not None}):
        out[label] = sum(1 for x in labels if x == label)
    return out


def _group_test(rows: Sequence[Stage2Row], attr: str, name: str,
                notices: List[str], confidence: float) -> Optional[TTestResult]:
    groups: Dict[str, List[float]] = {}
    for r in rows:
        label = getattr(r, attr)
        if label is not None:
            groups.setdefault(label, []).append(float(r.ln_k))  # type: ignore[arg-type]
    levels = sorted(groups)
    if len(levels) != 2:
        notices.append(f"{name} comparison skipped: needs exactly 2 levels, found {len(levels)}"
                       + (f" ({', '.join(levels)})" if levels else ""))
        return None
    small = [lv for lv in levels if len(groups[lv]) < 2]
    if small:
        notices.append(f"{name} comparison skipped: fewer than 2 usable rows in group(s) "
                       + ", ".join(small))
        return None
    try:
        return welch_t_test(groups[levels[0]], groups[levels[1]], confidence,
                            labels=(levels[0], levels[1]))
    except ValueError as exc:
        notices.append(f"{name} comparison skipped: {exc}")
        return None


def run_stage2(rows: Sequence[Stage2Row], confidence: float = 0.95) -> Stage2Results:
    """Group comparisons of ln k by gender and smoking status plus ln k ~ age.

    Rows whose ln k is undefined (a zero rate) are left out and counted in a
    notice. Levels are ordered alphabetically, so a test reports
    ``mean(first level) - mean(second level)``.
    """
    notices: List[str] = []
    undefined = tuple(r.id for r in rows if r.ln_k is None or not math.isfinite(r.ln_k))
    if undefined:
        notices.append(f"{len(undefined)} row(s) with undefined ln k excluded: "
                       + ", ".join(undefined[:20]) + (" ..." if len(undefined) > 20 else ""))
    usable = [r for r in rows if r.ln_k is not None and math.isfinite(r.ln_k)]
    ln_k_summary = summarize([r.ln_k for r in usable]) if usable else None
    ages_all = [r.age for r in rows if r.age is not None]
    age_summary = summarize(ages_all) if ages_all else None

    gender_test = _group_test(usable, "gender", "gender", notices, confidence)
    smoker_test = _group_test(usable, "smoker", "smoking", notices, confidence)

    regression = correlation = None
    paired = [r for r in usable if r.age is not None]
    if len(paired) < 3:
        notices.append(f"ln k ~ age skipped: needs at least 3 rows with age, found {len(paired)}")
    else:
        ages = [r.age for r in paired]
        lnk = [r.ln_k for r in paired]
        try:
            regression = simple_linear_regression(ages, lnk, confidence)
            correlation = pearson_cor(ages, lnk)
        except ValueError as exc:
            notices.append(f"ln k ~ age skipped: {exc}")
            regression = correlation = None
    return Stage2Results(
        n_rows=len(rows), n_used=len(usable), undefined_ln_k=undefined,
        ln_k_summary=ln_k_summary, age_summary=age_summary,
        gender_counts=_counts([r.gender for r in rows]),
        smoker_counts=_counts([r.smoker for r in rows]),
        gender_test=gender_test, smoker_test=smoker_test,
        regression=regression, correlation=correlation, notices=tuple(notices))
