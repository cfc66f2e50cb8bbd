"""Per-participant metrics (AUC, ln k, ED50) and the Stage-1 batch driver."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

from .core import FitResult, IndifferenceSeries, ed50
from .fitting import FitConfig, fit_mazur, fit_rachlin
from .screening import attention_check, jb_screen

MODEL_CHOICES = ("mazur", "rachlin", "both")


def trapezoid_area(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Area under the piecewise-linear curve through ``(xs, ys)``."""
    if len(xs) != len(ys):
        raise ValueError(f"xs and ys differ in length ({len(xs)} vs {len(ys)})")
    if len(xs) < 2:
        raise ValueError("need at least two points")
    total = 0.0
    for i in range(len(xs) - 1):
        width = xs[i + 1] - xs[i]
        if not width > 0:
            raise ValueError(f"xs must be strictly increasing (position {i}: {xs[i]} then {xs[i + 1]})")
        total += width * (ys[i] + ys[i + 1]) / 2.0
    return total


def auc_raw(series: IndifferenceSeries, normalized: bool = False) -> float:
    """Trapezoid area over the raw delays.

    ``normalized`` divides by the delay span, giving a value in [0, 1]
    (indifference points are already fractions of the larger-later reward).
    """
    area = trapezoid_area(series.delays, series.values)
    return area / (series.delays[-1] - series.delays[0]) if normalized else area


def auc_log(series: IndifferenceSeries, normalized: bool = False) -> float:
    """Trapezoid area over natural-log delays; no extension to delay 0."""
    xs = [math.log(d) for d in series.delays]
    area = trapezoid_area(xs, series.values)
    return area / (xs[-1] - xs[0]) if normalized else area


def ln_k(fit: FitResult) -> Optional[float]:
    """Natural log of the Mazur rate; ``None`` marks the undefined k = 0 case."""
    k = fit.params.k
    if k < 0:
        raise ValueError(f"negative rate {k}")
    return math.log(k) if k > 0 else None


@dataclass(frozen=True)
class ParticipantMetrics:
    participant_id: str
    mazur: Optional[FitResult]
    rachlin: Optional[FitResult]
    ln_k: Optional[float]
    ed50_mazur: Optional[float]
    ed50_rachlin: Optional[float]
    auc: float
    auc_log: float
    jb_violation: bool
    attention_fail: Optional[bool]
    error: str = ""

    @property
    def fit_converged(self) -> bool:
        fits = [f for f in (self.mazur, self.rachlin) if f is not None]
        return not self.error and bool(fits) and all(f.converged for f in fits)

    def to_record(self) -> dict:
        return {
            "id": self.participant_id,
            "k_mazur": self.mazur.params.k if self.mazur else None,
            "ln_k": self.ln_k,
            "ed50_mazur": self.ed50_mazur,
            "k_rachlin": self.rachlin.params.k if self.rachlin else None,
            "s_rachlin": self.rachlin.params.s if self.rachlin else None,
            "ed50_rachlin": self.ed50_rachlin,
            "auc": self.auc,
            "auc_log": self.auc_log,
            "jb_violation": self.jb_violation,
            "attention_fail": self.attention_fail,
            "fit_converged": self.fit_converged,
        }


def participant_metrics(record, config: Optional[FitConfig] = None,
                        models: str = "mazur") -> ParticipantMetrics:
    """Metrics for one ``ParticipantRecord``.

    Mazur is always fitted because ln k and the Rachlin starting point come
    from it; ``models`` decides whether Rachlin is added. A failing fit is
    recorded in ``error`` rather than raised.
    """
    if models not in MODEL_CHOICES:
        raise ValueError(f"unknown model selection {models!r}; expected one of {MODEL_CHOICES}")
    config = config or FitConfig()
    series = record.series
    stored = getattr(record, "jb_viol_stored", None)
    jb = bool(stored) if stored is not None else jb_screen(series).jb_violated
    attention = getattr(record, "ddattend", None)
    attention_fail = attention_check(attention) if attention is not None else None

    mazur = rachlin = None
    error = ""
    try:
        mazur = fit_mazur(series, config)
        if models != "mazur":
            rachlin = fit_rachlin(series, config, mazur=mazur)
    except (ArithmeticError, ValueError, FloatingPointError) as exc:
        error = f"{type(exc).__name__}: {exc}"
    return ParticipantMetrics(
        participant_id=str(record.id), mazur=mazur, rachlin=rachlin,
        ln_k=ln_k(mazur) if mazur else None,
        ed50_mazur=ed50(mazur.params) if mazur else None,
        ed50_rachlin=ed50(rachlin.params) if rachlin else None,
        auc=auc_raw(series), auc_log=auc_log(series),
        jb_violation=jb, attention_fail=attention_fail, error=error)


def _job(args):
    record, config, models = args
    return participant_metrics(record, config, models)


def run_stage1(dataset, config: Optional[FitConfig] = None, models: str = "mazur",
               jobs: int = 1) -> List[ParticipantMetrics]:
    """Fit every participant, returning metrics in input order.

    With ``jobs > 1`` participants are spread over worker processes; each fit
    is independent, so the results are identical to the serial run.
    """
    config = config or FitConfig()
    work = [(r, config, models) for r in dataset.rows]
    if jobs <= 1 or len(work) < 2:
        return [_job(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_job, work, chunksize=max(1, len(work) // (4 * jobs))))


def k_vector(metrics: Sequence[ParticipantMetrics]) -> List[Optional[float]]:
    return [m.mazur.params.k if m.mazur else None for m in metrics]
