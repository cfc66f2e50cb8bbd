"""Two-stage delay discounting analysis: per-participant model fits and group inference."""

from .core import (DEFAULT_DELAYS, FitResult, IndifferenceSeries, MazurParams, RachlinParams,
                   SeriesError, ed50, ed50_mazur, ed50_rachlin, predict, predict_mazur,
                   predict_rachlin)
from .fitting import FitConfig, fit_mazur, fit_model, fit_rachlin, rss
from .metrics import ParticipantMetrics, auc_log, auc_raw, ln_k, run_stage1, trapezoid_area
from .screening import attention_check, crosstab, jb_screen, subset_dataset
from .inference import (pearson_cor, run_stage2, simple_linear_regression, summarize,
                        welch_t_test)
from .dataio import Dataset, ParticipantRecord, parse_wide_csv, write_metrics_csv

__version__ = "0.1.0"
