"""Domain types and closed-form discounting model math.

Indifference points are fractions of the larger-later reward, so the reward
amount is fixed at 1 throughout: the Mazur model predicts ``1 / (1 + k*D)``
and the Rachlin model ``1 / (1 + k*D**s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

DEFAULT_DELAYS: Tuple[float, ...] = (1.0, 7.0, 30.0, 90.0, 365.0, 1825.0, 9125.0)


class SeriesError(ValueError):
    """Raised when an indifference series violates its invariants."""


@dataclass(frozen=True)
class IndifferenceSeries:
    """One participant's delays (days) and normalized indifference points."""

    delays: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self) -> None:
        delays = tuple(float(d) for d in self.delays)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "values", values)
        if len(delays) != len(values):
            raise SeriesError(
                f"delays and values differ in length ({len(delays)} vs {len(values)})"
            )
        if len(delays) < 2:
            raise SeriesError("a series needs at least two points")
        for d in delays:
            if not (math.isfinite(d) and d > 0):
                raise SeriesError(f"delay {d!r} is not a finite positive number")
        for a, b in zip(delays, delays[1:]):
            if not b > a:
                raise SeriesError(f"delays must be strictly increasing ({a} then {b})")
        for i, v in enumerate(values):
            if not (0.0 <= v <= 1.0):
                raise SeriesError(f"value {v!r} at position {i} is outside [0, 1]")

    @classmethod
    def from_values(cls, values: Sequence[float],
                    delays: Sequence[float] = DEFAULT_DELAYS) -> "IndifferenceSeries":
        return cls(tuple(delays), tuple(values))

    def __len__(self) -> int:
        return len(self.delays)


@dataclass(frozen=True)
class MazurParams:
    k: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.k) and self.k >= 0):
            raise ValueError(f"Mazur k must be finite and non-negative, got {self.k!r}")

    def as_tuple(self) -> Tuple[float, ...]:
        return (self.k,)


@dataclass(frozen=True)
class RachlinParams:
    k: float
    s: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.k) and self.k >= 0):
            raise ValueError(f"Rachlin k must be finite and non-negative, got {self.k!r}")
        if not (math.isfinite(self.s) and self.s > 0):
            raise ValueError(f"Rachlin s must be finite and positive, got {self.s!r}")

    def as_tuple(self) -> Tuple[float, ...]:
        return (self.k, self.s)


ModelParams = Union[MazurParams, RachlinParams]


@dataclass(frozen=True)
class FitResult:
    """Outcome of fitting one model to one series.

    ``rss`` is always recomputed at ``params``. ``tolerance_achieved`` is only
    set by the Gauss-Newton method, where it holds the final relative-offset
    criterion; it is ``None`` elsewhere so results compare equal across processes.
    """

    params: ModelParams
    rss: float
    iterations: int
    converged: bool
    objective_evaluations: int
    method: str = "lsq"
    tolerance_achieved: Optional[float] = None
    message: str = ""

    @property
    def model(self) -> str:
        return "mazur" if isinstance(self.params, MazurParams) else "rachlin"


def predict_mazur(params: MazurParams, delay: float) -> float:
    if delay < 0:
        raise ValueError(f"delay must be non-negative, got {delay!r}")
    return 1.0 / (1.0 + params.k * delay)


def _pow_delay(delay: float, s: float) -> float:
    return math.exp(s * math.log(delay))


def predict_rachlin(params: RachlinParams, delay: float) -> float:
    if delay < 0:
        raise ValueError(f"delay must be non-negative, got {delay!r}")
    if delay == 0:
        return 1.0
    return 1.0 / (1.0 + params.k * _pow_delay(delay, params.s))


def predict(params: ModelParams, delay: float) -> float:
    if isinstance(params, MazurParams):
        return predict_mazur(params, delay)
    return predict_rachlin(params, delay)


def ed50_mazur(params: MazurParams) -> float:
    """Delay at which the Mazur curve reaches one half; ``inf`` when k is 0."""
    if params.k == 0:
        return math.inf
    return 1.0 / params.k


def ed50_rachlin(params: RachlinParams) -> float:
    """Delay at which the Rachlin curve reaches one half, ``(1/k)**(1/s)``."""
    if params.k == 0:
        return math.inf
    try:
        return (1.0 / params.k) ** (1.0 / params.s)
    except OverflowError:
        return math.inf


def ed50(params: ModelParams) -> float:
    if isinstance(params, MazurParams):
        return ed50_mazur(params)
    return ed50_rachlin(params)
