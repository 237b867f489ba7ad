"""Checkpoint scanning, rank histories, and correlation reports."""

from .history import RankRecord, append_history, iter_history, latest_wins, read_history
from .manifest import RunManifest, default_container_path
from .report import (
    BestLayerRow,
    CorrelationReport,
    correlate_run,
    emit_report,
    write_performance_scatter,
    write_plot_data,
    write_rank_series,
)
from .scan import Gap, ScanResult, scan_run

__all__ = [
    "BestLayerRow",
    "CorrelationReport",
    "Gap",
    "RankRecord",
    "RunManifest",
    "ScanResult",
    "append_history",
    "correlate_run",
    "default_container_path",
    "emit_report",
    "iter_history",
    "latest_wins",
    "read_history",
    "scan_run",
    "write_performance_scatter",
    "write_plot_data",
    "write_rank_series",
]
