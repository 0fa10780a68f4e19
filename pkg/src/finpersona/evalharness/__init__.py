"""Metrics, the shuffle test, ablations and reports."""

from .harness import (
    SETTING_LABELS,
    SETTINGS,
    evaluate,
    expected_funnel,
    format_report,
    month_permutations,
    projected_engagement,
    run_ablations,
    shuffle_months,
    shuffle_test,
    table_rows,
    write_table,
)
from .metrics import HeadReport, RunReport, confusion, head_report, macro_f1, per_class_f1

__all__ = [
    "HeadReport",
    "RunReport",
    "SETTINGS",
    "SETTING_LABELS",
    "confusion",
    "evaluate",
    "expected_funnel",
    "format_report",
    "head_report",
    "macro_f1",
    "month_permutations",
    "per_class_f1",
    "projected_engagement",
    "run_ablations",
    "shuffle_months",
    "shuffle_test",
    "table_rows",
    "write_table",
]
