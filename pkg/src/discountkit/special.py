"""Distribution functions backing the Stage-2 p-values and intervals."""

from __future__ import annotations

import math

_EPS = 1e-16
_TINY = 1e-300
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _stirling_correction(x: float) -> float:
    """lgamma(x) - Stirling's approximation, for x >= 10."""
    x2 = 1.0 / (x * x)
    return (1.0 / 12.0 - x2 * (1.0 / 360.0 - x2 * (1.0 / 1260.0 - x2 * (
        1.0 / 1680.0 - x2 * (1.0 / 1188.0))))) / x


def log_beta(a: float, b: float) -> float:
    """ln B(a, b), avoiding the cancellation in lgamma sums for large arguments."""
    p, q = min(a, b), max(a, b)
    if p >= 10.0:
        corr = _stirling_correction(p) + _stirling_correction(q) - _stirling_correction(p + q)
        return (-0.5 * math.log(q) + _HALF_LOG_2PI + corr
                + (p - 0.5) * math.log(p / (p + q)) + q * math.log1p(-p / (p + q)))
    if q >= 10.0:
        corr = _stirling_correction(q) - _stirling_correction(p + q)
        return (math.lgamma(p) + corr + p - p * math.log(p + q)
                + (q - 0.5) * math.log1p(-p / (p + q)))
    return math.lgamma(p) + math.lgamma(q) - math.lgamma(p + q)


def _beta_continued_fraction(x: float, a: float, b: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    max_terms = 10000 + int(20 * math.sqrt(max(a, b)))
    for m in range(1, max_terms):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b})")


def _front(x: float, a: float, b: float) -> float:
    return math.exp(a * math.log(x) + b * math.log1p(-x) - log_beta(a, b))


def reg_incomplete_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"shape parameters must be positive and finite, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    if x < (a + 1.0) / (a + b + 2.0):
        return _front(x, a, b) * _beta_continued_fraction(x, a, b) / a
    return 1.0 - _front(1.0 - x, b, a) * _beta_continued_fraction(1.0 - x, b, a) / b


def _beta_upper_lower(t: float, df: float) -> float:
    """P(T > |t|) for Student's t, computed without cancellation."""
    t2 = t * t
    if t2 < df:
        # x = df / (df + t^2) is close to 1 here; use the complementary argument
        y = t2 / (df + t2)
        return 0.5 * (1.0 - reg_incomplete_beta(y, 0.5, 0.5 * df))
    x = df / (df + t2)
    return 0.5 * reg_incomplete_beta(x, 0.5 * df, 0.5)


def t_sf(x: float, df: float) -> float:
    """Upper tail P(T > x)."""
    if not df > 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if math.isnan(x):
        return math.nan
    if math.isinf(x):
        return 0.0 if x > 0 else 1.0
    tail = _beta_upper_lower(x, df)
    return tail if x >= 0 else 1.0 - tail


def t_cdf(x: float, df: float) -> float:
    """Student-t cumulative distribution; ``df`` may be non-integer."""
    if not df > 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if math.isnan(x):
        return math.nan
    if x == 0:
        return 0.5
    if math.isinf(x):
        return 1.0 if x > 0 else 0.0
    tail = _beta_upper_lower(x, df)
    return 1.0 - tail if x > 0 else tail


def t_two_sided_p(t: float, df: float) -> float:
    return min(1.0, 2.0 * _beta_upper_lower(t, df)) if math.isfinite(t) else 0.0


def t_pdf(x: float, df: float) -> float:
    log_density = (-0.5 * (df + 1.0) * math.log1p(x * x / df)
                   - 0.5 * math.log(df) - log_beta(0.5, 0.5 * df))
    return math.exp(log_density)


def t_ppf(p: float, df: float) -> float:
    """Quantile of Student's t by bracketed Newton iteration on ``t_cdf``."""
    if not 0.0 < p < 1.0:
        if p == 0.0:
            return -math.inf
        if p == 1.0:
            return math.inf
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -t_ppf(1.0 - p, df)
    target = 1.0 - p
    lo, hi = 0.0, 1.0
    while t_sf(hi, df) > target:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            return math.inf
    x = 0.5 * (lo + hi)
    for _ in range(200):
        err = t_sf(x, df) - target
        if err > 0:
            lo = x
        else:
            hi = x
        step = err / t_pdf(x, df)
        candidate = x + step
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi)
        if abs(candidate - x) <= 1e-15 * max(1.0, abs(x)):
            return candidate
        x = candidate
    return x


def f_sf(f: float, df1: float, df2: float) -> float:
    """Upper tail of the F distribution."""
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return reg_incomplete_beta(df2 / (df2 + df1 * f), 0.5 * df2, 0.5 * df1)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_pdf(x: float, mean: float = 0.0, sd: float = 1.0) -> float:
    z = (x - mean) / sd
    return math.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))
