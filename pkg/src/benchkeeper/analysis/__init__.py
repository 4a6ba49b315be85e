"""Scaling tables, regression and anomaly findings, and report rendering."""
from .findings import KINDS, Finding, InsufficientDataError
from .report import render_csv, render_report, render_svg
from .series import (
    MetricSeries,
    ScalingRow,
    detect_step,
    find_change_point,
    format_scaling_table,
    median,
    metric_value,
    scaling_table,
    segment_sse,
    series_by_configuration,
)
from .telemetry import (
    JobTelemetry,
    NodeTelemetry,
    detect_idle_tail,
    detect_initial_memory,
    synthetic_idle_tail,
)
