"""Least-squares fitting of discounting models.

Two routes are provided:

* ``lsq`` (default) finds the RSS minimizer. Mazur fits scan ln(k) on a
  coarse grid and refine with Brent's method; Rachlin fits run Nelder-Mead
  in (ln k, ln s).
* ``nls`` replays the Gauss-Newton iteration with step halving and the
  relative-offset stopping rule used by R's ``nls``. It stops short of the
  exact minimizer in the same way R does, which is what reproduces
  published nls printouts digit for digit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import FitResult, IndifferenceSeries, MazurParams, ModelParams, RachlinParams

GOLDEN = 0.3819660112501051  # (3 - sqrt(5)) / 2
LN_K_FLOOR = -40.0
LN_K_CEIL = 12.0
_GRID_POINTS = 521
_SQRT_EPS = math.sqrt(np.finfo(float).eps)

FIT_METHODS = ("lsq", "nls")


class NonFiniteObjectiveError(ArithmeticError):
    """The objective returned NaN or infinity."""


@dataclass(frozen=True)
class FitConfig:
    start_mazur: float = 0.1
    start_rachlin: Tuple[float, float] = (0.1, 0.1)
    rel_tolerance: float = 1e-10
    max_iterations: int = 500
    method: str = "lsq"
    # settings for the nls route, mirroring nls.control() defaults
    nls_tolerance: float = 1e-5
    nls_max_iterations: int = 50
    nls_min_factor: float = 1.0 / 1024.0

    def __post_init__(self) -> None:
        if not self.rel_tolerance > 0 or not self.nls_tolerance > 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1 or self.nls_max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.method not in FIT_METHODS:
            raise ValueError(f"unknown fit method {self.method!r}; expected one of {FIT_METHODS}")
        if self.start_mazur < 0 or min(self.start_rachlin) <= 0:
            raise ValueError("start values must be positive")


@dataclass
class ObjectiveTrace:
    """Records every (parameter vector, rss) pair an objective is evaluated at."""

    points: List[Tuple[Tuple[float, ...], float]] = field(default_factory=list)

    def record(self, params: Sequence[float], value: float) -> None:
        self.points.append((tuple(float(p) for p in params), float(value)))

    def __len__(self) -> int:
        return len(self.points)


# ---------------------------------------------------------------------------
# objectives


def _arrays(series: IndifferenceSeries) -> Tuple[np.ndarray, np.ndarray]:
    return np.asarray(series.delays, dtype=float), np.asarray(series.values, dtype=float)


def mazur_curve(k: float, delays: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + k * delays)


def rachlin_curve(k: float, s: float, delays: np.ndarray) -> np.ndarray:
    powered = np.exp(s * np.log(np.where(delays > 0, delays, 1.0)))
    return np.where(delays > 0, 1.0 / (1.0 + k * powered), 1.0)


def rss(series: IndifferenceSeries, params: ModelParams) -> float:
    """Residual sum of squares of ``params`` against ``series``."""
    delays, values = _arrays(series)
    if isinstance(params, MazurParams):
        fitted = mazur_curve(params.k, delays)
    else:
        fitted = rachlin_curve(params.k, params.s, delays)
    resid = values - fitted
    return float(resid @ resid)


# ---------------------------------------------------------------------------
# generic minimizers


def _checked(f: Callable, x) -> float:
    value = float(f(x))
    if not math.isfinite(value):
        raise NonFiniteObjectiveError(f"objective is {value} at parameter value {x!r}")
    return value


def minimize_1d(objective: Callable[[float], float], bracket: Tuple[float, float],
                tol: float = 1e-10, abs_tol: float = 1e-12,
                max_iterations: int = 500) -> Tuple[float, float]:
    """Brent's minimizer on ``[lo, hi]``: golden section with parabolic steps.

    The step acceptance rules follow Brent's ``localmin``. ``tol`` is a
    relative tolerance on the abscissa and ``abs_tol`` an absolute one.
    Returns ``(argmin, min value)``.
    """
    a, b = float(bracket[0]), float(bracket[1])
    if not a < b:
        raise ValueError(f"bracket must satisfy lo < hi, got ({a}, {b})")
    if tol <= 0:
        raise ValueError("tol must be positive")

    x = w = v = a + GOLDEN * (b - a)
    fx = fw = fv = _checked(objective, x)
    d = e = 0.0
    for _ in range(max_iterations):
        m = 0.5 * (a + b)
        tol1 = tol * abs(x) + abs_tol
        tol2 = 2.0 * tol1
        if abs(x - m) <= tol2 - 0.5 * (b - a):
            break
        golden_step = True
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0:
                p = -p
            q = abs(q)
            if abs(p) < abs(0.5 * q * e) and q * (a - x) < p < q * (b - x):
                e, d = d, p / q
                u = x + d
                if u - a < tol2 or b - u < tol2:
                    d = tol1 if x < m else -tol1
                golden_step = False
        if golden_step:
            e = (b - x) if x < m else (a - x)
            d = GOLDEN * e
        u = x + (d if abs(d) >= tol1 else math.copysign(tol1, d))
        fu = _checked(objective, u)
        if fu <= fx:
            if u < x:
                b = x
            else:
                a = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return x, fx


@dataclass(frozen=True)
class SimplexResult:
    x: Tuple[float, ...]
    fun: float
    converged: bool
    iterations: int
    evaluations: int


def minimize_simplex(objective: Callable[[np.ndarray], float], start: Sequence[float],
                     config: Optional[FitConfig] = None,
                     initial_step: float = 0.05) -> SimplexResult:
    """Nelder-Mead simplex descent.

    Converged once the simplex diameter and the spread of objective values
    both fall below ``config.rel_tolerance`` (relative, with an absolute floor
    of tolerance**2 on the objective). Hitting the iteration cap returns the
    best vertex with ``converged=False``.
    """
    config = config or FitConfig()
    tol = config.rel_tolerance
    x0 = np.asarray(start, dtype=float)
    n = x0.size
    evaluations = 0

    def f(x: np.ndarray) -> float:
        nonlocal evaluations
        evaluations += 1
        return _checked(objective, x)

    simplex = np.empty((n + 1, n))
    simplex[0] = x0
    for i in range(n):
        vertex = x0.copy()
        vertex[i] = vertex[i] * (1 + initial_step) if vertex[i] != 0 else 0.00025
        simplex[i + 1] = vertex
    values = np.array([f(v) for v in simplex])

    converged = False
    iterations = 0
    while iterations < config.max_iterations:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        best = simplex[0]
        diameter = np.max(np.abs(simplex[1:] - best))
        spread = values[-1] - values[0]
        if (diameter <= tol * max(1.0, np.max(np.abs(best)))
                and spread <= tol * abs(values[0]) + tol * tol):
            converged = True
            break
        iterations += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        reflected = centroid + (centroid - worst)
        f_reflected = f(reflected)
        if f_reflected < values[0]:
            expanded = centroid + 2.0 * (centroid - worst)
            f_expanded = f(expanded)
            if f_expanded < f_reflected:
                simplex[-1], values[-1] = expanded, f_expanded
            else:
                simplex[-1], values[-1] = reflected, f_reflected
            continue
        if f_reflected < values[-2]:
            simplex[-1], values[-1] = reflected, f_reflected
            continue
        if f_reflected < values[-1]:
            contracted = centroid + 0.5 * (reflected - centroid)
            f_contracted = f(contracted)
            if f_contracted <= f_reflected:
                simplex[-1], values[-1] = contracted, f_contracted
                continue
        else:
            contracted = centroid + 0.5 * (worst - centroid)
            f_contracted = f(contracted)
            if f_contracted < values[-1]:
                simplex[-1], values[-1] = contracted, f_contracted
                continue
        # shrink toward the best vertex
        for i in range(1, n + 1):
            simplex[i] = best + 0.5 * (simplex[i] - best)
            values[i] = f(simplex[i])

    i_best = int(np.argmin(values))
    return SimplexResult(tuple(float(v) for v in simplex[i_best]), float(values[i_best]),
                         converged, iterations, evaluations)


@dataclass(frozen=True)
class GaussNewtonResult:
    params: Tuple[float, ...]
    rss: float
    iterations: int
    converged: bool
    evaluations: int
    tolerance_achieved: float
    message: str = ""


def gauss_newton(model: Callable[[np.ndarray], np.ndarray], y: np.ndarray,
                 start: Sequence[float], tolerance: float = 1e-5,
                 max_iterations: int = 50,
                 min_factor: float = 1.0 / 1024.0) -> GaussNewtonResult:
    """Gauss-Newton least squares with R ``nls`` stopping semantics.

    The Jacobian is a forward difference with step ``|p| * sqrt(eps)``. The
    convergence criterion is the relative offset
    ``sqrt(|Q1'r|^2 / |Q2'r|^2)`` from the QR decomposition of the Jacobian.
    The step factor halves until the deviance does not increase and doubles
    (capped at 1) after each accepted step; it carries over between
    iterations. Failures are reported through ``converged=False``.
    """
    p = np.asarray(start, dtype=float).copy()
    y = np.asarray(y, dtype=float)
    npar = p.size
    evaluations = 0

    def evaluate(params: np.ndarray) -> np.ndarray:
        nonlocal evaluations
        evaluations += 1
        out = model(params)
        if not np.all(np.isfinite(out)):
            raise NonFiniteObjectiveError(f"model is not finite at parameters {params!r}")
        return out

    def jacobian(params: np.ndarray, f0: np.ndarray) -> np.ndarray:
        jac = np.empty((y.size, npar))
        for j in range(npar):
            step = _SQRT_EPS if params[j] == 0 else abs(params[j]) * _SQRT_EPS
            shifted = params.copy()
            shifted[j] += step
            jac[:, j] = (evaluate(shifted) - f0) / step
        return jac

    def fail(i: int, conv: float, msg: str) -> GaussNewtonResult:
        return GaussNewtonResult(tuple(p.tolist()), float(resid @ resid), i, False,
                                 evaluations, conv, msg)

    try:
        fitted = evaluate(p)
    except NonFiniteObjectiveError as exc:
        return GaussNewtonResult(tuple(p.tolist()), math.nan, 0, False, evaluations,
                                 math.nan, str(exc))
    resid = y - fitted
    dev = float(resid @ resid)
    factor = 1.0
    conv = math.nan
    for i in range(max_iterations):
        try:
            jac = jacobian(p, fitted)
        except NonFiniteObjectiveError as exc:
            return fail(i, conv, str(exc))
        q, r = np.linalg.qr(jac, mode="complete")
        if np.min(np.abs(np.diag(r[:npar, :npar]))) <= 1e-7 * np.max(np.abs(jac)):
            return fail(i, conv, "singular gradient")
        rotated = q.T @ resid
        denom = float(rotated[npar:] @ rotated[npar:])
        num = float(rotated[:npar] @ rotated[:npar])
        conv = math.sqrt(num / denom) if denom > 0 else math.inf
        if conv <= tolerance:
            return GaussNewtonResult(tuple(p.tolist()), dev, i, True, evaluations, conv)
        increment = np.linalg.solve(r[:npar, :npar], rotated[:npar])
        while factor >= min_factor:
            trial = p + factor * increment
            try:
                trial_fit = evaluate(trial)
            except NonFiniteObjectiveError:
                factor /= 2.0
                continue
            trial_resid = y - trial_fit
            trial_dev = float(trial_resid @ trial_resid)
            if trial_dev <= dev:
                p, fitted, resid, dev = trial, trial_fit, trial_resid, trial_dev
                factor = min(2.0 * factor, 1.0)
                break
            factor /= 2.0
        else:
            return fail(i + 1, conv, "step factor reduced below minimum")
    return fail(max_iterations, conv, "number of iterations exceeded maximum")


# ---------------------------------------------------------------------------
# model fits


def _mazur_residuals(t, delays: np.ndarray, values: np.ndarray) -> np.ndarray:
    # y - 1/(1+kD) rewritten as (y - 1) + kD/(1+kD): keeps full relative
    # precision when kD is tiny and the curve sits just below 1
    kd = np.multiply.outer(np.exp(t), delays)
    return (values - 1.0) + kd / (1.0 + kd)


def _mazur_rss_of_lnk(delays: np.ndarray, values: np.ndarray) -> Callable[[float], float]:
    def objective(t: float) -> float:
        resid = _mazur_residuals(t, delays, values)
        return float(resid @ resid)
    return objective


def _mazur_slope_of_lnk(delays: np.ndarray, values: np.ndarray) -> Callable[[float], float]:
    """Derivative of the Mazur RSS with respect to ln k (up to a factor 2)."""
    def slope(t: float) -> float:
        kd = math.exp(t) * delays
        return float(_mazur_residuals(t, delays, values) @ (kd / (1.0 + kd) ** 2))
    return slope


def _polish_root(slope: Callable[[float], float], t: float, width: float,
                 max_iterations: int = 200) -> Optional[float]:
    """Bisect the slope's sign change near ``t``; None when there is none."""
    lo, hi = t - width, t + width
    f_lo, f_hi = slope(lo), slope(hi)
    if not (f_lo < 0 < f_hi):
        return None
    for _ in range(max_iterations):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = slope(mid)
        if f_mid == 0:
            return mid
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fit_mazur(series: IndifferenceSeries, config: Optional[FitConfig] = None) -> FitResult:
    """Fit ``1/(1 + k*D)`` by least squares.

    With the default ``lsq`` method the search runs over ln(k) on
    ``[-40, 12]``: a grid scan locates the best basin and Brent refines it.
    An estimate at the lower edge of the range is reported as ``k = 0``, as
    is any estimate whose RSS does not beat ``k = 0``.
    """
    config = config or FitConfig()
    if config.method == "nls":
        return _fit_nls(series, MazurParams, (config.start_mazur,), config)

    delays, values = _arrays(series)
    grid = np.linspace(LN_K_FLOOR, LN_K_CEIL, _GRID_POINTS)
    grid_rss = np.sum(_mazur_residuals(grid, delays, values) ** 2, axis=1)
    i_best = int(np.argmin(grid_rss))
    lo = grid[max(i_best - 1, 0)]
    hi = grid[min(i_best + 1, grid.size - 1)]

    objective = _mazur_rss_of_lnk(delays, values)
    evaluations = grid.size
    counted = _Counting(objective)
    t_hat, rss_hat = minimize_1d(counted, (lo, hi), tol=config.rel_tolerance,
                                 abs_tol=config.rel_tolerance,
                                 max_iterations=config.max_iterations)
    evaluations += counted.calls
    if grid_rss[i_best] < rss_hat:
        t_hat, rss_hat = float(grid[i_best]), float(grid_rss[i_best])
    # In a very flat valley RSS differences drown in rounding long before ln k
    # is pinned down; the slope's sign change is resolvable much further.
    polished = _polish_root(_mazur_slope_of_lnk(delays, values), t_hat, grid[1] - grid[0])
    if polished is not None and objective(polished) <= rss_hat * (1.0 + 1e-12):
        t_hat, rss_hat = polished, objective(polished)

    rss_zero = float((values - 1.0) @ (values - 1.0))
    k_hat = math.exp(t_hat)
    message = ""
    if t_hat <= LN_K_FLOOR + (grid[1] - grid[0]) or rss_zero <= rss_hat:
        k_hat = 0.0
        message = "estimate at the k = 0 boundary"
    elif t_hat >= LN_K_CEIL - (grid[1] - grid[0]):
        message = "estimate at the upper edge of the search range"
    params = MazurParams(k_hat)
    return FitResult(params, rss(series, params), counted.calls, True, evaluations + 1,
                     method="lsq", message=message)


class _Counting:
    def __init__(self, f: Callable):
        self.f = f
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        return self.f(x)


def fit_rachlin(series: IndifferenceSeries, config: Optional[FitConfig] = None,
                mazur: Optional[FitResult] = None) -> FitResult:
    """Fit ``1/(1 + k*D**s)`` by least squares.

    The ``lsq`` route runs Nelder-Mead over (ln k, ln s) from the configured
    start and, separately, from the Mazur solution (s = 1); each run is
    restarted from its end point until it stops improving. Because the Mazur
    solution is itself a Rachlin point, the returned RSS never exceeds the
    Mazur RSS.
    """
    config = config or FitConfig()
    if config.method == "nls":
        return _fit_nls(series, RachlinParams, config.start_rachlin, config)

    delays, values = _arrays(series)
    log_delays = np.log(delays)

    def objective(theta: np.ndarray) -> float:
        k = math.exp(theta[0])
        # huge exponents overflow to inf, which correctly predicts 0
        with np.errstate(over="ignore"):
            resid = values - 1.0 / (1.0 + k * np.exp(math.exp(theta[1]) * log_delays))
        return float(resid @ resid)

    if mazur is None:
        mazur = fit_mazur(series, FitConfig(rel_tolerance=config.rel_tolerance,
                                            max_iterations=config.max_iterations))
    k_m = mazur.params.k
    starts = [np.log(np.asarray(config.start_rachlin, dtype=float)),
              np.array([math.log(k_m) if k_m > 0 else LN_K_FLOOR, 0.0])]

    best: Optional[SimplexResult] = None
    iterations = evaluations = 0
    converged = True
    for start in starts:
        result = minimize_simplex(objective, start, config)
        iterations += result.iterations
        evaluations += result.evaluations
        for _ in range(20):
            again = minimize_simplex(objective, result.x, config)
            iterations += again.iterations
            evaluations += again.evaluations
            improved = again.fun < result.fun
            if again.fun <= result.fun:
                result = again
            if not improved:
                break
        converged = converged and result.converged
        if best is None or result.fun < best.fun:
            best = result

    assert best is not None
    k_hat, s_hat = math.exp(best.x[0]), math.exp(best.x[1])
    params = RachlinParams(k_hat if best.x[0] > LN_K_FLOOR else 0.0, s_hat)
    value = rss(series, params)
    message = ""
    if value > mazur.rss:
        params, value, message = RachlinParams(k_m, 1.0), mazur.rss, "fell back to the Mazur solution"
    if not converged:
        message = message or "simplex iteration cap reached"
    return FitResult(params, value, iterations, converged, evaluations,
                     method="lsq", message=message)


def _fit_nls(series: IndifferenceSeries, kind, start: Sequence[float],
             config: FitConfig) -> FitResult:
    delays, values = _arrays(series)
    if kind is MazurParams:
        def model(p: np.ndarray) -> np.ndarray:
            return 1.0 / (1.0 + p[0] * delays)
    else:
        def model(p: np.ndarray) -> np.ndarray:
            return 1.0 / (1.0 + p[0] * delays ** p[1])

    result = gauss_newton(model, values, start, tolerance=config.nls_tolerance,
                          max_iterations=config.nls_max_iterations,
                          min_factor=config.nls_min_factor)
    converged, message = result.converged, result.message
    estimate = list(result.params)
    if estimate[0] < 0 or (len(estimate) > 1 and estimate[1] <= 0):
        # nls is unconstrained; report the nearest admissible point as unconverged
        estimate[0] = max(estimate[0], 0.0)
        if len(estimate) > 1:
            estimate[1] = max(estimate[1], np.finfo(float).tiny)
        converged = False
        message = message or f"estimate {tuple(result.params)} outside the parameter space"
    params = kind(*estimate)
    return FitResult(params, rss(series, params), result.iterations, converged,
                     result.evaluations, method="nls",
                     tolerance_achieved=None if math.isnan(result.tolerance_achieved)
                     else result.tolerance_achieved, message=message)


def fit_model(series: IndifferenceSeries, model: str,
              config: Optional[FitConfig] = None) -> FitResult:
    if model == "mazur":
        return fit_mazur(series, config)
    if model == "rachlin":
        return fit_rachlin(series, config)
    raise ValueError(f"unknown model {model!r}")


def rss_curve(series: IndifferenceSeries, ks: Sequence[float]) -> ObjectiveTrace:
    """Mazur RSS over a sequence of k values, for plotting the objective."""
    trace = ObjectiveTrace()
    for k in ks:
        trace.record((k,), rss(series, MazurParams(float(k))))
    return trace
