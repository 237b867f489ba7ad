"""Join rank histories with downstream metrics and render reports.

The best-layer table puts the layer with the best mean downstream metric next
to the layer with the highest mean rank, per task. The two are computed
independently; disagreement between them is an expected finding, not an
error.
"""

from __future__ import annotations

import csv
import io
import json
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from ..errors import JoinError
from ..ingest.metrics import DownstreamRecord
from ..stats import (
    GroupKey,
    GroupResult,
    Grouping,
    Observation,
    group_label,
    orient,
    tau_by_group,
)
from .history import RankRecord, latest_wins

SCHEMA_VERSION = 1
# keys listed verbatim in a JoinError message before eliding the rest
MAX_LISTED_KEYS = 20


@dataclass(frozen=True)
class LayerSummary:
    layer: int
    mean_rank: float
    mean_performance: float
    n: int


@dataclass(frozen=True)
class BestLayerRow:
    task: str
    best_by_performance: int
    best_by_rank: int
    layers: tuple[LayerSummary, ...]

    @property
    def agree(self) -> bool:
        return self.best_by_performance == self.best_by_rank


@dataclass
class CorrelationReport:
    grouping: Grouping
    groups: list[GroupResult]
    insufficient: list[tuple[GroupKey, int]]
    best_layers: list[BestLayerRow]
    observations: list[Observation]
    unmatched_rank_keys: list[tuple]
    unmatched_metric_keys: list[tuple]

    @property
    def degenerate(self) -> list[GroupResult]:
        return [g for g in self.groups if g.result.degenerate]


def join(ranks: Iterable[RankRecord], metrics: Iterable[DownstreamRecord]):
    """Inner join on (run_id, step, layer); ranks are deduplicated latest-wins."""
    by_key = {r.key: r for r in latest_wins(ranks)}
    metrics = list(metrics)
    observations = []
    matched = set()
    unmatched_metrics = []
    for m in metrics:
        r = by_key.get((m.run_id, m.step, m.layer))
        if r is None:
            unmatched_metrics.append(m.key)
            continue
        matched.add(r.key)
        observations.append(
            Observation(m.run_id, m.step, m.layer, m.task, r.rank_value, orient(m))
        )
    unmatched_ranks = sorted(k for k in by_key if k not in matched)
    observations.sort(key=lambda o: (o.task, o.layer, o.run_id, o.step))
    return observations, unmatched_ranks, sorted(unmatched_metrics)


def _argmax_layer(summaries: Sequence[LayerSummary], attr: str) -> int:
    # ties go to the lowest layer index
    best = max(summaries, key=lambda s: (getattr(s, attr), -s.layer))
    return best.layer


def best_layer_table(observations: Iterable[Observation]) -> list[BestLayerRow]:
    cells: dict[str, dict[int, list[Observation]]] = defaultdict(lambda: defaultdict(list))
    for o in observations:
        cells[o.task][o.layer].append(o)
    rows = []
    for task in sorted(cells):
        summaries = tuple(
            LayerSummary(
                layer,
                sum(o.rank for o in obs) / len(obs),
                sum(o.performance for o in obs) / len(obs),
                len(obs),
            )
            for layer, obs in sorted(cells[task].items())
        )
        rows.append(
            BestLayerRow(
                task,
                best_by_performance=_argmax_layer(summaries, "mean_performance"),
                best_by_rank=_argmax_layer(summaries, "mean_rank"),
                layers=summaries,
            )
        )
    return rows


def _listing(keys: list[tuple]) -> str:
    shown = ", ".join(str(k) for k in keys[:MAX_LISTED_KEYS])
    if len(keys) > MAX_LISTED_KEYS:
        shown += f", ... ({len(keys) - MAX_LISTED_KEYS} more)"
    return shown or "none"


def correlate_run(
    ranks: Iterable[RankRecord],
    metrics: Iterable[DownstreamRecord],
    grouping=Grouping.PER_LAYER_AND_TASK,
) -> CorrelationReport:
    """Kendall's tau per group plus the best-layer table."""
    grouping = Grouping(grouping)
    observations, unmatched_ranks, unmatched_metrics = join(ranks, metrics)
    if not observations:
        raise JoinError(
            "no (run_id, step, layer) key is shared by ranks and metrics; "
            f"unmatched rank keys: {_listing(unmatched_ranks)}; "
            f"unmatched metric keys: {_listing(unmatched_metrics)}",
            unmatched_ranks,
            unmatched_metrics,
        )
    grouped = tau_by_group(observations, grouping)
    return CorrelationReport(
        grouping=grouping,
        groups=grouped.groups,
        insufficient=grouped.insufficient,
        best_layers=best_layer_table(observations),
        observations=observations,
        unmatched_rank_keys=unmatched_ranks,
        unmatched_metric_keys=unmatched_metrics,
    )


def _sig(x: Optional[float]) -> Optional[float]:
    """Round to 9 significant digits."""
    if x is None:
        return None
    return float(f"{x:.9g}")


def _sig_text(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.9g}"


def report_to_dict(report: CorrelationReport) -> dict:
    groups = []
    for g in report.groups:
        r = g.result
        groups.append(
            {
                "group": g.label,
                "key": {field: value for field, value in g.key},
                "n": r.n_pairs,
                "tau": _sig(r.tau),
                "p_value": _sig(r.p_value),
                "p_method": r.p_method,
                "concordant": r.concordant,
                "discordant": r.discordant,
                "ties_x": r.ties_x,
                "ties_y": r.ties_y,
                "ties_xy": r.ties_xy,
            }
        )
    best = [
        {
            "task": row.task,
            "best_by_performance": row.best_by_performance,
            "best_by_rank": row.best_by_rank,
            "agree": row.agree,
            "layers": [
                {
                    "layer": s.layer,
                    "mean_rank": _sig(s.mean_rank),
                    "mean_performance": _sig(s.mean_performance),
                    "n": s.n,
                }
                for s in row.layers
            ],
        }
        for row in report.best_layers
    ]
    return {
        "schema_version": SCHEMA_VERSION,
        "grouping": report.grouping.value,
        "n_observations": len(report.observations),
        "groups": groups,
        "best_layers": best,
        "diagnostics": {
            "insufficient_groups": [
                {"group": group_label(k), "n": n} for k, n in report.insufficient
            ],
            "degenerate_groups": [g.label for g in report.degenerate],
            "unmatched_rank_keys": [list(k) for k in report.unmatched_rank_keys],
            "unmatched_metric_keys": [list(k) for k in report.unmatched_metric_keys],
        },
    }


def emit_report(report: CorrelationReport, fmt: str = "json") -> str:
    """Render ``report`` as JSON or as a ``group,tau,p_value,n`` CSV.

    Output depends only on the report contents, so rendering twice gives
    identical text.
    """
    if fmt == "json":
        return json.dumps(report_to_dict(report), indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["group", "tau", "p_value", "n"])
        for g in report.groups:
            writer.writerow(
                [g.label, _sig_text(g.result.tau), _sig_text(g.result.p_value), g.result.n_pairs]
            )
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_rank_series(records: Iterable[RankRecord], directory) -> list[Path]:
    """One ``rank_vs_step_layer-<L>.csv`` per layer: rank against training step."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    by_layer: dict[int, list[RankRecord]] = defaultdict(list)
    for r in latest_wins(records):
        by_layer[r.layer].append(r)
    paths = []
    for layer in sorted(by_layer):
        rows = sorted(by_layer[layer], key=lambda r: (r.step, r.run_id))
        paths.append(
            _write_csv(
                directory / f"rank_vs_step_layer-{layer}.csv",
                ["run_id", "step", "rank_value"],
                ([r.run_id, r.step, _sig_text(r.rank_value)] for r in rows),
            )
        )
    return paths


def write_performance_scatter(report: CorrelationReport, directory) -> list[Path]:
    """One ``perf_vs_rank_task-<T>.csv`` per task with a layer column."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    by_task: dict[str, list[Observation]] = defaultdict(list)
    for o in report.observations:
        by_task[o.task].append(o)
    paths = []
    for task in sorted(by_task):
        rows = sorted(by_task[task], key=lambda o: (o.layer, o.run_id, o.step))
        paths.append(
            _write_csv(
                directory / f"perf_vs_rank_task-{_safe(task)}.csv",
                ["layer", "run_id", "step", "rank_value", "performance"],
                (
                    [o.layer, o.run_id, o.step, _sig_text(o.rank), _sig_text(o.performance)]
                    for o in rows
                ),
            )
        )
    return paths


def write_plot_data(
    records: Iterable[RankRecord],
    directory,
    report: Optional[CorrelationReport] = None,
) -> list[Path]:
    paths = write_rank_series(records, directory)
    if report is not None:
        paths += write_performance_scatter(report, directory)
    return paths
