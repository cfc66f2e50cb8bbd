"""Data-quality screening: Johnson & Bickel criteria, attention check, exclusion."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

from .core import IndifferenceSeries

ATTENTION_FAIL_LEVEL = "$0.00  now"
ATTENTION_PASS_LEVEL = "$100.00 in 1 day"


@dataclass(frozen=True)
class ScreeningResult:
    criterion1_violated: bool
    criterion2_violated: bool
    attention_failed: Optional[bool] = None
    first_violation_index: Optional[int] = None

    @property
    def jb_violated(self) -> bool:
        return self.criterion1_violated or self.criterion2_violated


def jb_screen(series: IndifferenceSeries, threshold1: float = 0.20,
              threshold2: float = 0.10) -> ScreeningResult:
    """Flag nonsystematic discounting.

    Criterion 1 fires when some point rises above its predecessor by strictly
    more than ``threshold1``. Criterion 2 fires unless the last point sits at
    least ``threshold2`` below the first. Thresholds are fractions of the
    larger-later reward, so a rise of exactly 0.20 or a drop of exactly 0.10
    does not flag. A tiny slack absorbs binary rounding of decimal inputs
    (0.9 - 0.7 is 0.20000000000000007).
    """
    y = series.values
    slack = 1e-12
    first_jump = None
    for i in range(1, len(y)):
        if y[i] - y[i - 1] > threshold1 + slack:
            first_jump = i
            break
    drop = y[0] - y[-1]
    return ScreeningResult(
        criterion1_violated=first_jump is not None,
        criterion2_violated=not drop >= threshold2 - slack,
        first_violation_index=first_jump,
    )


def normalize_level(text: str) -> str:
    return " ".join(str(text).split())


def attention_check(response: str,
                    fail_level: str = ATTENTION_FAIL_LEVEL,
                    pass_level: str = ATTENTION_PASS_LEVEL) -> bool:
    """Return True when the response is the failing attention-check level.

    Runs of whitespace are collapsed before comparing, so ``"$0.00 now"`` and
    ``"$0.00  now"`` are the same answer.
    """
    answer = normalize_level(response)
    if answer == normalize_level(fail_level):
        return True
    if answer == normalize_level(pass_level):
        return False
    raise ValueError(f"unrecognized attention-check response {response!r}")


def tabulate(labels: Iterable[Hashable]) -> Dict[Hashable, int]:
    """Counts per label, keys sorted."""
    counts = Counter(labels)
    return {key: counts[key] for key in sorted(counts, key=_sort_key)}


def _sort_key(value):
    return (str(type(value).__name__), value) if not isinstance(value, (int, float, bool)) \
        else ("0", value)


@dataclass(frozen=True)
class CrossTable:
    row_levels: Tuple[Hashable, ...]
    col_levels: Tuple[Hashable, ...]
    counts: Dict[Tuple[Hashable, Hashable], int]

    def count(self, row: Hashable, col: Hashable) -> int:
        return self.counts.get((row, col), 0)

    def row_totals(self) -> Dict[Hashable, int]:
        return {r: sum(self.count(r, c) for c in self.col_levels) for r in self.row_levels}

    def col_totals(self) -> Dict[Hashable, int]:
        return {c: sum(self.count(r, c) for r in self.row_levels) for c in self.col_levels}

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def as_matrix(self) -> List[List[int]]:
        return [[self.count(r, c) for c in self.col_levels] for r in self.row_levels]


def crosstab(flags_a: Sequence[Hashable], flags_b: Sequence[Hashable]) -> CrossTable:
    if len(flags_a) != len(flags_b):
        raise ValueError(f"length mismatch ({len(flags_a)} vs {len(flags_b)})")
    pairs = Counter(zip(flags_a, flags_b))
    rows = tuple(tabulate(flags_a))
    cols = tuple(tabulate(flags_b))
    return CrossTable(rows, cols, {key: pairs[key] for key in
                                   sorted(pairs, key=lambda p: (_sort_key(p[0]), _sort_key(p[1])))})


def subset_dataset(dataset, predicate: Callable) -> "Dataset":
    """Keep the rows for which ``predicate(record)`` is true, in order."""
    from .dataio import Dataset

    kept = tuple(row for row in dataset.rows if predicate(row))
    return Dataset(kept, dataset.delay_schedule, dataset.columns, dataset.warnings)


def exclusion_rule(exclude_jb: bool = False, exclude_attention: bool = False,
                   use_stored_jb: bool = True) -> Callable:
    """Build a keep-predicate for ``subset_dataset``.

    JB exclusion reads the stored ``JBviol`` flag when present, falling back to
    the recomputed screen.
    """
    def keep(record) -> bool:
        if exclude_jb:
            stored = record.jb_viol_stored if use_stored_jb else None
            violated = bool(stored) if stored is not None else jb_screen(record.series).jb_violated
            if violated:
                return False
        if exclude_attention and record.ddattend is not None:
            if attention_check(record.ddattend):
                return False
        return True
    return keep


@dataclass(frozen=True)
class ScreeningReport:
    jb_table: Dict[Hashable, int]
    attention_table: Dict[Hashable, int]
    cross: Optional[CrossTable]
    recomputed_jb_table: Dict[Hashable, int]
    mismatched_ids: Tuple[str, ...]
    stored_jb_present: bool
    attention_present: bool


def screen_dataset(dataset) -> ScreeningReport:
    """Univariate and two-way screening tables plus stored-vs-recomputed checks."""
    rows = dataset.rows
    recomputed = [int(jb_screen(r.series).jb_violated) for r in rows]
    stored_present = bool(rows) and all(r.jb_viol_stored is not None for r in rows)
    attention_present = bool(rows) and all(r.ddattend is not None for r in rows)
    jb = [r.jb_viol_stored for r in rows] if stored_present else recomputed
    mismatched = tuple(r.id for r, flag in zip(rows, recomputed)
                       if r.jb_viol_stored is not None and int(r.jb_viol_stored) != flag)
    attention = [r.ddattend for r in rows] if attention_present else []
    cross = crosstab(jb, attention) if attention_present else None
    return ScreeningReport(
        jb_table=tabulate(jb), attention_table=tabulate(attention), cross=cross,
        recomputed_jb_table=tabulate(recomputed), mismatched_ids=mismatched,
        stored_jb_present=stored_present, attention_present=attention_present)
