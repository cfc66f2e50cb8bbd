"""Reading wide-format discounting data and writing per-participant metrics."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass
from typing import IO, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .core import IndifferenceSeries, SeriesError


class DataValidationError(ValueError):
    """Input data failed validation; ``problems`` lists every offending cell."""

    def __init__(self, message: str, problems: Sequence[str] = ()):
        self.problems = list(problems)
        detail = "".join(f"\n  - {p}" for p in self.problems[:50])
        if len(self.problems) > 50:
            detail += f"\n  ... and {len(self.problems) - 50} more"
        super().__init__(message + detail)


@dataclass(frozen=True)
class Schema:
    """Column names of the wide-format file."""

    id: str = "id"
    age: str = "age"
    gender: str = "gender"
    smoke_cigs: str = "smoke_cigs"
    ddattend: str = "ddattend"
    jb_viol: str = "JBviol"
    value_prefix: str = "y"
    required: Tuple[str, ...] = ("id", "age", "gender", "smoke_cigs")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> "Schema":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(mapping) - known
        if unknown:
            raise ValueError(f"unknown schema keys: {sorted(unknown)}")
        values = dict(mapping)
        if "required" in values:
            values["required"] = tuple(values["required"])  # type: ignore[arg-type]
        return cls(**values)  # type: ignore[arg-type]


@dataclass(frozen=True)
class ParticipantRecord:
    id: str
    series: IndifferenceSeries
    age: Optional[float] = None
    gender: Optional[str] = None
    smoke_cigs: Optional[str] = None
    ddattend: Optional[str] = None
    jb_viol_stored: Optional[int] = None


@dataclass(frozen=True)
class Dataset:
    rows: Tuple[ParticipantRecord, ...]
    delay_schedule: Tuple[float, ...]
    columns: Tuple[str, ...] = ()
    warnings: Tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.rows), len(self.columns)


_MISSING = {"", "na", "nan", "null"}


def _delay_of(column: str, prefix: str) -> Optional[float]:
    if not column.startswith(prefix):
        return None
    suffix = column[len(prefix):]
    if not re.fullmatch(r"\d+(\.\d+)?", suffix):
        return None
    return float(suffix)


def parse_wide_csv(content: Union[str, IO[str]], schema: Optional[Schema] = None,
                   allow_missing: bool = False) -> Dataset:
    """Parse a wide-format CSV, one participant per row.

    Indifference columns are recognized by ``schema.value_prefix`` followed by
    a numeric delay (``y1``, ``y7``, ..., ``y9125``) and ordered by delay.
    Problems are collected across the whole file before raising. With
    ``allow_missing`` rows that have empty indifference cells are dropped and
    listed in ``Dataset.warnings``.
    """
    schema = schema or Schema()
    text = content if isinstance(content, str) else content.read()
    if text.startswith("﻿"):
        text = text[1:]
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataValidationError("input is empty; a header row is required") from None

    missing = [getattr(schema, name) for name in schema.required
               if getattr(schema, name) not in header]
    delay_cols = sorted(
        ((d, c) for c in header if (d := _delay_of(c, schema.value_prefix)) is not None),
        key=lambda dc: dc[0])
    if len(delay_cols) < 2:
        missing.append(f"{schema.value_prefix}<delay> (need at least two indifference columns)")
    if missing:
        raise DataValidationError("missing required column(s): " + ", ".join(missing), missing)
    if len({d for d, _ in delay_cols}) != len(delay_cols):
        raise DataValidationError("duplicate delays among indifference columns",
                                  [c for _, c in delay_cols])
    schedule = tuple(d for d, _ in delay_cols)
    index = {name: i for i, name in enumerate(header)}

    problems: List[str] = []
    warnings: List[str] = []
    records: List[ParticipantRecord] = []
    seen: Dict[str, int] = {}

    def cell(row: List[str], column: str) -> Optional[str]:
        i = index.get(column)
        if i is None or i >= len(row):
            return None
        return row[i].strip()

    for line_no, row in enumerate(reader, start=2):
        if not any(c.strip() for c in row):
            continue
        if len(row) != len(header):
            problems.append(f"line {line_no}: expected {len(header)} fields, found {len(row)}")
            continue
        pid = cell(row, schema.id) or ""
        values: List[float] = []
        row_missing = []
        row_ok = True
        for delay, column in delay_cols:
            raw = cell(row, column) or ""
            if raw.lower() in _MISSING:
                row_missing.append(column)
                continue
            try:
                v = float(raw)
            except ValueError:
                problems.append(f"line {line_no}, column {column}: non-numeric value {raw!r}")
                row_ok = False
                continue
            if not (0.0 <= v <= 1.0):
                problems.append(f"line {line_no}, column {column}: value {v} outside [0, 1]")
                row_ok = False
            values.append(v)
        if row_missing:
            if allow_missing:
                warnings.append(f"line {line_no} (id {pid}): dropped, missing {', '.join(row_missing)}")
                continue
            problems.append(f"line {line_no} (id {pid}): missing indifference value(s) in "
                            + ", ".join(row_missing))
            continue

        age = None
        if schema.age in index:
            raw_age = cell(row, schema.age) or ""
            if raw_age.lower() not in _MISSING:
                try:
                    age = float(raw_age)
                except ValueError:
                    problems.append(f"line {line_no}, column {schema.age}: non-numeric age {raw_age!r}")
                    row_ok = False
        jb = None
        if schema.jb_viol in index:
            raw_jb = cell(row, schema.jb_viol) or ""
            if raw_jb.lower() not in _MISSING:
                if raw_jb in ("0", "1"):
                    jb = int(raw_jb)
                else:
                    problems.append(f"line {line_no}, column {schema.jb_viol}: expected 0 or 1, "
                                    f"found {raw_jb!r}")
                    row_ok = False
        if not row_ok:
            continue
        if pid in seen:
            warnings.append(f"duplicate id {pid!r} on lines {seen[pid]} and {line_no}")
        else:
            seen[pid] = line_no
        try:
            series = IndifferenceSeries(schedule, tuple(values))
        except SeriesError as exc:
            problems.append(f"line {line_no}: {exc}")
            continue
        # categorical levels are kept verbatim, including internal spacing
        records.append(ParticipantRecord(
            id=pid, series=series, age=age,
            gender=_verbatim(row, index, schema.gender),
            smoke_cigs=_verbatim(row, index, schema.smoke_cigs),
            ddattend=_verbatim(row, index, schema.ddattend),
            jb_viol_stored=jb))

    if problems:
        raise DataValidationError(f"{len(problems)} validation problem(s) in input", problems)
    return Dataset(tuple(records), schedule, tuple(header), tuple(warnings))


def _verbatim(row: List[str], index: Mapping[str, int], column: str) -> Optional[str]:
    i = index.get(column)
    if i is None:
        return None
    value = row[i]
    return None if value.strip().lower() in _MISSING else value


def read_wide_csv(path, schema: Optional[Schema] = None, allow_missing: bool = False) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_wide_csv(fh.read(), schema, allow_missing)


def _shortest(v: float) -> str:
    """Shortest text that parses back to exactly ``v``."""
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _format_delay(d: float) -> str:
    return str(int(d)) if float(d).is_integer() else repr(d)


def write_wide_csv(dataset: Dataset, sink: IO[str], schema: Optional[Schema] = None) -> None:
    """Write a dataset back in wide format (the inverse of ``parse_wide_csv``)."""
    schema = schema or Schema()
    y_cols = [f"{schema.value_prefix}{_format_delay(d)}" for d in dataset.delay_schedule]
    header = [schema.id, schema.age, schema.gender, schema.smoke_cigs, *y_cols,
              schema.ddattend, schema.jb_viol]
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(header)
    for r in dataset.rows:
        writer.writerow([
            r.id, "" if r.age is None else _shortest(r.age),
            r.gender or "", r.smoke_cigs or "",
            *(_shortest(v) for v in r.series.values),
            r.ddattend or "", "" if r.jb_viol_stored is None else r.jb_viol_stored])


# ---------------------------------------------------------------------------
# metrics output

METRIC_COLUMNS = ("id", "k_mazur", "ln_k", "ed50_mazur", "k_rachlin", "s_rachlin",
                  "ed50_rachlin", "auc", "auc_log", "jb_violation", "attention_fail",
                  "fit_converged")


def format_number(value: Optional[float], digits: int = 10) -> str:
    """Locale-independent text for a float: ``NA`` for missing, ``Inf`` for infinity."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NA"
    if math.isinf(value):
        return "Inf" if value > 0 else "-Inf"
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return f"{value:.{digits}g}"


def parse_number(text: str) -> Optional[float]:
    t = text.strip()
    if t in ("NA", ""):
        return None
    if t == "Inf":
        return math.inf
    if t == "-Inf":
        return -math.inf
    return float(t)


def _flag(value: Optional[bool]) -> str:
    return "NA" if value is None else str(int(bool(value)))


def metrics_rows(metrics: Iterable) -> List[Dict[str, str]]:
    rows = []
    for m in metrics:
        record = m.to_record()
        rows.append({
            key: (_flag(record[key]) if key in ("jb_violation", "attention_fail", "fit_converged")
                  else record[key] if key == "id" else format_number(record[key]))
            for key in METRIC_COLUMNS})
    return rows


def write_metrics_csv(metrics: Iterable, sink: IO[str]) -> None:
    writer = csv.DictWriter(sink, fieldnames=METRIC_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in metrics_rows(metrics):
        writer.writerow(row)


def metrics_to_json(metrics: Iterable) -> str:
    """JSON mirror of the metrics CSV (same field names, same rounding)."""
    out = []
    for row in metrics_rows(metrics):
        item: Dict[str, object] = {"id": row["id"]}
        for key in METRIC_COLUMNS[1:]:
            text = row[key]
            if key in ("jb_violation", "attention_fail", "fit_converged"):
                item[key] = None if text == "NA" else bool(int(text))
            else:
                value = parse_number(text)
                item[key] = value if value is None or math.isfinite(value) else text
        out.append(item)
    return json.dumps(out, indent=2, sort_keys=False) + "\n"


@dataclass(frozen=True)
class MetricsRow:
    """A metrics record as read back from CSV."""

    id: str
    k_mazur: Optional[float]
    ln_k: Optional[float]
    ed50_mazur: Optional[float]
    k_rachlin: Optional[float]
    s_rachlin: Optional[float]
    ed50_rachlin: Optional[float]
    auc: Optional[float]
    auc_log: Optional[float]
    jb_violation: Optional[bool]
    attention_fail: Optional[bool]
    fit_converged: Optional[bool]


def read_metrics_csv(source: Union[str, IO[str]]) -> List[MetricsRow]:
    text = source if isinstance(source, str) else source.read()
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return []
    missing = [c for c in METRIC_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise DataValidationError("metrics file lacks column(s): " + ", ".join(missing), missing)
    rows = []
    for raw in reader:
        values: Dict[str, object] = {"id": raw["id"]}
        for key in METRIC_COLUMNS[1:]:
            if key in ("jb_violation", "attention_fail", "fit_converged"):
                values[key] = None if raw[key] == "NA" else raw[key] == "1"
            else:
                values[key] = parse_number(raw[key])
        rows.append(MetricsRow(**values))  # type: ignore[arg-type]
    return rows
