"""Folds, SOP/SPH scoring, significance testing and reports."""
from .fixtures import PublishedRow, load_published_tables
from .folds import (Fold, FoldPlan, Score, false_prediction_rate, interictal_grid, make_folds,
                    score_alarms, window_spans)
from .harness import (FoldResult, SubjectResult, assert_no_leakage, evaluate_subject,
                      task_seed)
from .report import (REPORT_COLUMNS, report_csv, report_rows, report_table,
                     seizure_time_histogram)
from .significance import (chance_alarm_probability, predicted_count, random_predictor_pvalue,
                           simulate_alarm_probability, simulate_pvalue, worst_case_pvalue)

__all__ = [
    "Fold", "FoldPlan", "FoldResult", "PublishedRow", "REPORT_COLUMNS", "Score",
    "SubjectResult", "assert_no_leakage", "chance_alarm_probability", "evaluate_subject",
    "false_prediction_rate", "interictal_grid", "load_published_tables", "make_folds",
    "predicted_count", "random_predictor_pvalue", "report_csv", "report_rows", "report_table",
    "score_alarms", "seizure_time_histogram", "simulate_alarm_probability", "simulate_pvalue",
    "task_seed", "window_spans", "worst_case_pvalue",
]
