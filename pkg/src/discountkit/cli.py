"""Command-line pipeline: ingestion, screening, Stage 1 fits, Stage 2 inference, reports."""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import re
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core import DEFAULT_DELAYS, IndifferenceSeries, SeriesError
from .dataio import (DataValidationError, Dataset, MetricsRow, ParticipantRecord, Schema,
                     metrics_to_json, parse_wide_csv, read_metrics_csv, write_metrics_csv,
                     write_wide_csv)
from .fitting import FIT_METHODS, FitConfig
from .inference import Stage2Row, residual_diagnostics, run_stage2
from .metrics import MODEL_CHOICES, run_stage1
from .report import (plot_box, plot_fit, plot_histogram, plot_mosaic, plot_scatter,
                     svg_document, text_report)
from .screening import (ATTENTION_FAIL_LEVEL, ATTENTION_PASS_LEVEL, crosstab,
                        exclusion_rule, jb_screen, screen_dataset, subset_dataset)

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3

DEFAULTS: Dict[str, object] = {
    "input": None, "schema": None, "metrics": None, "model": "mazur",
    "exclude_jb": False, "exclude_attention": False, "allow_missing": False,
    "out_metrics": None, "out_json": None, "out_report": None, "plots_dir": None,
    "tolerance": None, "fit_method": "lsq", "log_x": False, "jobs": 1,
    "seed": 1, "n": 106, "output": None,
}
# settings that change analysis results; echoed in report headers
ECHOED = ("input", "schema", "model", "exclude_jb", "exclude_attention", "allow_missing",
          "tolerance", "fit_method")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="discountkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p: argparse.ArgumentParser, fits: bool = True) -> None:
        p.add_argument("--input", help="wide-format CSV, one participant per row")
        p.add_argument("--schema", help="JSON file remapping column names")
        p.add_argument("--config", help="JSON file of option defaults (flags take precedence)")
        p.add_argument("--exclude-jb", action="store_true", default=None)
        p.add_argument("--exclude-attention", action="store_true", default=None)
        p.add_argument("--allow-missing", action="store_true", default=None,
                       help="drop rows with missing indifference values instead of failing")
        p.add_argument("--out-report", help="write the text report here")
        p.add_argument("--plots-dir", help="directory for SVG plots")
        if fits:
            p.add_argument("--model", choices=MODEL_CHOICES)
            p.add_argument("--tolerance", type=float)
            p.add_argument("--fit-method", choices=FIT_METHODS)
            p.add_argument("--log-x", action="store_true", default=None)
            p.add_argument("--jobs", type=int)

    fit = sub.add_parser("fit", help="Stage 1: fit every participant")
    common(fit)
    fit.add_argument("--out-metrics")
    fit.add_argument("--out-json")

    stage2 = sub.add_parser("stage2", help="Stage 2: group comparisons and ln k ~ age")
    common(stage2)
    stage2.add_argument("--metrics", help="metrics CSV from a previous fit run")

    screen = sub.add_parser("screen", help="screening tables")
    common(screen, fits=False)

    report = sub.add_parser("report", help="full text report without writing metrics")
    common(report)
    report.add_argument("--metrics", help="metrics CSV from a previous fit run")

    everything = sub.add_parser("all", help="screen, fit and Stage 2 in one run")
    common(everything)
    everything.add_argument("--out-metrics")
    everything.add_argument("--out-json")

    sim = sub.add_parser("simulate", help="write a synthetic wide-format dataset")
    sim.add_argument("--config")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--n", type=int)
    sim.add_argument("--output", help="destination CSV (standard output when omitted)")
    return parser


def resolve_config(args: argparse.Namespace) -> Dict[str, object]:
    """Defaults, then the --config file, then explicit flags."""
    settings = dict(DEFAULTS)
    path = getattr(args, "config", None)
    if path:
        with open(path, encoding="utf-8") as fh:
            try:
                from_file = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataValidationError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(from_file, dict):
            raise DataValidationError(f"config file {path} must hold a JSON object")
        unknown = sorted(set(from_file) - set(DEFAULTS))
        if unknown:
            raise DataValidationError(f"config file {path} has unknown keys: {', '.join(unknown)}")
        settings.update(from_file)
    for key, value in vars(args).items():
        if key in DEFAULTS and value is not None:
            settings[key] = value
    if settings["model"] not in MODEL_CHOICES:
        raise DataValidationError(f"model must be one of {MODEL_CHOICES}")
    if int(settings["jobs"]) < 1:  # type: ignore[arg-type]
        raise DataValidationError("jobs must be at least 1")
    outputs = [settings[k] for k in ("out_metrics", "out_json", "out_report") if settings[k]]
    if len(set(map(os.path.abspath, outputs))) != len(outputs):  # type: ignore[arg-type]
        raise DataValidationError("output paths must be distinct")
    return settings


def fit_config(settings: Dict[str, object]) -> FitConfig:
    method = str(settings["fit_method"])
    tol = settings["tolerance"]
    if tol is None:
        return FitConfig(method=method)
    if method == "nls":
        return FitConfig(method=method, nls_tolerance=float(tol))  # type: ignore[arg-type]
    return FitConfig(method=method, rel_tolerance=float(tol))  # type: ignore[arg-type]


def load_dataset(settings: Dict[str, object]) -> Dataset:
    path = settings["input"]
    if not path:
        raise UsageError("--input is required")
    schema = Schema()
    if settings["schema"]:
        with open(str(settings["schema"]), encoding="utf-8") as fh:
            schema = Schema.from_mapping(json.load(fh))
    with open(str(path), newline="", encoding="utf-8") as fh:
        text = fh.read()
    dataset = parse_wide_csv(text, schema, allow_missing=bool(settings["allow_missing"]))
    if settings["exclude_jb"] or settings["exclude_attention"]:
        dataset = subset_dataset(dataset, exclusion_rule(bool(settings["exclude_jb"]),
                                                         bool(settings["exclude_attention"])))
    return dataset


def _header(settings: Dict[str, object]) -> Dict[str, object]:
    return {key: settings[key] for key in ECHOED}


def _safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", text) or "blank"


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _metrics_csv_text(metrics) -> str:
    sink = io.StringIO()
    write_metrics_csv(metrics, sink)
    return sink.getvalue()


def _stage2_rows(dataset: Dataset, metrics: Sequence[MetricsRow]) -> List[Stage2Row]:
    ids = [m.id for m in metrics]
    if len(set(ids)) == len(ids):
        by_id = {m.id: m for m in metrics}
        missing = [r.id for r in dataset.rows if r.id not in by_id]
        if missing:
            raise DataValidationError("metrics lack rows for participant id(s)", missing)
        joined = [(r, by_id[r.id]) for r in dataset.rows]
    elif len(metrics) == len(dataset.rows):
        joined = list(zip(dataset.rows, metrics))
    else:
        raise DataValidationError("metrics ids are not unique and row counts differ "
                                  f"({len(metrics)} vs {len(dataset.rows)})")
    return [Stage2Row(r.id, m.ln_k, r.age, r.gender, r.smoke_cigs) for r, m in joined]


def stage2_plots(rows: Sequence[Stage2Row], results, plots_dir: str) -> None:
    usable = [r for r in rows if r.ln_k is not None]
    plots = {}
    if usable:
        lnk = [r.ln_k for r in usable]
        plots["histogram_lnk"] = plot_histogram(lnk, 20, overlay_normal=True,
                                                title="ln k", x_label="ln(k)")
        for attr, name in (("gender", "gender"), ("smoker", "smoking")):
            groups: Dict[str, List[float]] = {}
            for r in usable:
                if getattr(r, attr) is not None:
                    groups.setdefault(getattr(r, attr), []).append(r.ln_k)
            if groups:
                plots[f"boxplot_lnk_{name}"] = plot_box(dict(sorted(groups.items())),
                                                        x_label=name, y_label="ln(k)")
        aged = [r for r in usable if r.age is not None]
        if aged:
            line = None
            if results.regression is not None:
                line = (results.regression.intercept, results.regression.slope)
            plots["scatter_lnk_age"] = plot_scatter([r.age for r in aged], [r.ln_k for r in aged],
                                                    x_label="Age", y_label="ln(k)", line=line)
    ages = [r.age for r in rows if r.age is not None]
    if ages:
        plots["histogram_age"] = plot_histogram(ages, overlay_normal=True, x_label="Age")
    genders = [r.gender for r in rows]
    smokers = [r.smoker for r in rows]
    if rows and None not in genders and None not in smokers:
        table = crosstab(genders, smokers)
        plots["mosaic_gender_smoking"] = plot_mosaic(
            [str(v) for v in table.row_levels], [str(v) for v in table.col_levels],
            table.as_matrix(), x_label="gender", y_label="smoke_cigs")
    if results.regression is not None:
        diag = residual_diagnostics(results.regression)
        plots["residuals_fitted"] = plot_scatter(diag.fitted, diag.residuals,
                                                 x_label="Fitted values", y_label="Residuals")
        plots["histogram_residuals"] = plot_histogram(diag.residuals, x_label="Residuals")
    os.makedirs(plots_dir, exist_ok=True)
    for name, spec in sorted(plots.items()):
        _write_text(os.path.join(plots_dir, f"{name}.svg"), svg_document(spec))


def fit_plots(dataset: Dataset, metrics, plots_dir: str, log_x: bool) -> None:
    os.makedirs(plots_dir, exist_ok=True)
    for record, m in zip(dataset.rows, metrics):
        fits = [f for f in (m.mazur, m.rachlin) if f is not None]
        spec = plot_fit(record.series, fits, log_x=log_x, title=f"Participant {record.id}")
        _write_text(os.path.join(plots_dir, f"fit_{_safe_name(record.id)}.svg"), svg_document(spec))


def _warn(dataset: Dataset, screening) -> List[str]:
    notes = list(dataset.warnings)
    if screening is not None and screening.mismatched_ids:
        notes.append("stored and recomputed JBviol disagree for id(s): "
                     + ", ".join(screening.mismatched_ids))
    return notes


def cmd_fit(settings: Dict[str, object]) -> int:
    dataset = load_dataset(settings)
    metrics = run_stage1(dataset, fit_config(settings), str(settings["model"]),
                         int(settings["jobs"]))  # type: ignore[arg-type]
    for w in dataset.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for m in metrics:
        if m.error:
            print(f"warning: participant {m.participant_id}: {m.error}", file=sys.stderr)
    text = _metrics_csv_text(metrics)
    if settings["out_metrics"]:
        _write_text(str(settings["out_metrics"]), text)
    if settings["out_json"]:
        _write_text(str(settings["out_json"]), metrics_to_json(metrics))
    if not settings["out_metrics"] and not settings["out_json"]:
        sys.stdout.write(text)
    if settings["plots_dir"]:
        fit_plots(dataset, metrics, str(settings["plots_dir"]), bool(settings["log_x"]))
    if settings["out_report"]:
        screening = screen_dataset(dataset)
        _write_text(str(settings["out_report"]),
                    text_report(read_metrics_csv(text), None, screening, _header(settings),
                                _warn(dataset, screening)))
    return EXIT_OK


def _analysis(settings: Dict[str, object], dataset: Dataset,
              metrics_rows: Sequence[MetricsRow]) -> str:
    screening = screen_dataset(dataset)
    rows = _stage2_rows(dataset, metrics_rows)
    results = run_stage2(rows)
    for notice in results.notices:
        print(f"notice: {notice}", file=sys.stderr)
    if settings["plots_dir"]:
        stage2_plots(rows, results, str(settings["plots_dir"]))
    return text_report(metrics_rows, results, screening, _header(settings),
                       _warn(dataset, screening))


def _emit_report(settings: Dict[str, object], report: str) -> None:
    if settings["out_report"]:
        _write_text(str(settings["out_report"]), report)
    else:
        sys.stdout.write(report)


def _metrics_for(settings: Dict[str, object], dataset: Dataset) -> List[MetricsRow]:
    if settings["metrics"]:
        with open(str(settings["metrics"]), newline="", encoding="utf-8") as fh:
            return read_metrics_csv(fh.read())
    metrics = run_stage1(dataset, fit_config(settings), str(settings["model"]),
                         int(settings["jobs"]))  # type: ignore[arg-type]
    # round-trip through the CSV text so fused and two-step runs see identical numbers
    return read_metrics_csv(_metrics_csv_text(metrics))


def cmd_stage2(settings: Dict[str, object]) -> int:
    dataset = load_dataset(settings)
    _emit_report(settings, _analysis(settings, dataset, _metrics_for(settings, dataset)))
    return EXIT_OK


def cmd_all(settings: Dict[str, object]) -> int:
    dataset = load_dataset(settings)
    metrics = run_stage1(dataset, fit_config(settings), str(settings["model"]),
                         int(settings["jobs"]))  # type: ignore[arg-type]
    text = _metrics_csv_text(metrics)
    if settings["out_metrics"]:
        _write_text(str(settings["out_metrics"]), text)
    if settings["out_json"]:
        _write_text(str(settings["out_json"]), metrics_to_json(metrics))
    if settings["plots_dir"]:
        fit_plots(dataset, metrics, str(settings["plots_dir"]), bool(settings["log_x"]))
    _emit_report(settings, _analysis(settings, dataset, read_metrics_csv(text)))
    return EXIT_OK


def screening_text(dataset: Dataset) -> str:
    screening = screen_dataset(dataset)
    lines = []
    if not dataset.rows:
        lines.append("no rows")
    if not screening.stored_jb_present:
        lines.append("notice: stored JBviol flags absent; showing recomputed flags only")
    lines.append("JBviol")
    lines.extend(f"  {k}: {v}" for k, v in screening.jb_table.items())
    if screening.stored_jb_present:
        lines.append("JBviol (recomputed)")
        lines.extend(f"  {k}: {v}" for k, v in screening.recomputed_jb_table.items())
    if screening.attention_present:
        lines.append("ddattend")
        lines.extend(f"  {k!r}: {v}" for k, v in screening.attention_table.items())
        lines.append("JBviol x ddattend")
        if screening.cross is not None:
            for r in screening.cross.row_levels:
                for c in screening.cross.col_levels:
                    lines.append(f"  {r} x {c!r}: {screening.cross.count(r, c)}")
    elif dataset.rows:
        lines.append("notice: attention-check column absent")
    if screening.mismatched_ids:
        lines.append("stored vs recomputed JBviol mismatch: " + ", ".join(screening.mismatched_ids))
    return "\n".join(lines) + "\n"


def cmd_screen(settings: Dict[str, object]) -> int:
    dataset = load_dataset(settings)
    for w in dataset.warnings:
        print(f"warning: {w}", file=sys.stderr)
    text = screening_text(dataset)
    _emit_report(settings, text)
    return EXIT_OK


def simulate_dataset(n: int, seed: int) -> Dataset:
    """Synthetic participants: Mazur curves with log-normal k plus bounded noise."""
    if n < 0:
        raise DataValidationError("n must be non-negative")
    rng = np.random.default_rng(seed)
    rows = []
    delays = np.asarray(DEFAULT_DELAYS)
    for i in range(n):
        k = math.exp(rng.normal(-4.9, 2.5))
        values = np.clip(1.0 / (1.0 + k * delays) + rng.normal(0.0, 0.06, delays.size), 0.0, 1.0)
        if rng.random() < 0.15:
            # a nonsystematic responder: indifference points in shuffled order
            values = rng.permutation(values)
        values = np.round(values, 4)
        series = IndifferenceSeries(DEFAULT_DELAYS, tuple(values.tolist()))
        rows.append(ParticipantRecord(
            id=str(i + 1), series=series, age=float(int(rng.integers(18, 68))),
            gender=str(rng.choice(["Female", "Male"])), smoke_cigs=str(rng.choice(["No", "Yes"])),
            ddattend=ATTENTION_FAIL_LEVEL if rng.random() < 0.06 else ATTENTION_PASS_LEVEL,
            jb_viol_stored=int(jb_screen(series).jb_violated)))
    return Dataset(tuple(rows), DEFAULT_DELAYS)


def cmd_simulate(settings: Dict[str, object]) -> int:
    dataset = simulate_dataset(int(settings["n"]), int(settings["seed"]))  # type: ignore[arg-type]
    sink = io.StringIO()
    write_wide_csv(dataset, sink)
    if settings["output"]:
        _write_text(str(settings["output"]), sink.getvalue())
    else:
        sys.stdout.write(sink.getvalue())
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "stage2": cmd_stage2, "screen": cmd_screen,
            "report": cmd_stage2, "all": cmd_all, "simulate": cmd_simulate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        settings = resolve_config(args)
        return COMMANDS[args.command](settings)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (DataValidationError, SeriesError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: cannot read {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the runtime exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
