"""Downstream-metric tables.

CSV with header ``run_id,step,layer,task,metric_value,orientation``; one row
per (run, checkpoint step, layer, task). ``orientation`` is ``higher`` for
accuracy-like metrics and ``lower`` for error rates.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO, Union

from ..errors import MetricsError

COLUMNS = ("run_id", "step", "layer", "task", "metric_value", "orientation")


class Orientation(enum.Enum):
    HIGHER_IS_BETTER = "higher"
    LOWER_IS_BETTER = "lower"


@dataclass(frozen=True)
class DownstreamRecord:
    run_id: str
    step: int
    layer: int
    task: str
    metric_value: float
    orientation: Orientation

    @property
    def key(self) -> tuple[str, int, int, str]:
        return (self.run_id, self.step, self.layer, self.task)


def _parse_uint(text: str, column: str, line: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise MetricsError(f"line {line}: {column} {text!r} is not an integer") from None
    if value < 0:
        raise MetricsError(f"line {line}: {column} must be nonnegative, got {value}")
    return value


def parse_metrics(fh: TextIO) -> list[DownstreamRecord]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        raise MetricsError("metrics table is empty (missing header)")
    if tuple(h.strip() for h in header) != COLUMNS:
        raise MetricsError(
            f"line 1: expected header {','.join(COLUMNS)}, got {','.join(header)}"
        )
    records: list[DownstreamRecord] = []
    seen: dict[tuple, int] = {}
    duplicates: list[str] = []
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(COLUMNS):
            raise MetricsError(f"line {line}: expected {len(COLUMNS)} fields, got {len(row)}")
        run_id, step, layer, task, value, orientation = (cell.strip() for cell in row)
        try:
            metric = float(value)
        except ValueError:
            raise MetricsError(f"line {line}: metric_value {value!r} is not numeric") from None
        if not math.isfinite(metric):
            raise MetricsError(f"line {line}: metric_value {value!r} is not finite")
        try:
            orient = Orientation(orientation)
        except ValueError:
            raise MetricsError(
                f"line {line}: unknown orientation {orientation!r} (expected 'higher' or 'lower')"
            ) from None
        rec = DownstreamRecord(
            run_id,
            _parse_uint(step, "step", line),
            _parse_uint(layer, "layer", line),
            task,
            metric,
            orient,
        )
        if rec.key in seen:
            duplicates.append(f"{rec.key} on lines {seen[rec.key]} and {line}")
        else:
            seen[rec.key] = line
        records.append(rec)
    if duplicates:
        raise MetricsError("duplicate keys: " + "; ".join(duplicates))
    return records


def read_metrics(source: Union[str, os.PathLike, TextIO]) -> list[DownstreamRecord]:
    if hasattr(source, "read"):
        return parse_metrics(source)
    with open(source, newline="") as fh:
        return parse_metrics(fh)


def format_metrics(records: Iterable[DownstreamRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in records:
        writer.writerow(
            [r.run_id, r.step, r.layer, r.task, repr(float(r.metric_value)), r.orientation.value]
        )
    return buf.getvalue()


def write_metrics(records: Iterable[DownstreamRecord], destination) -> None:
    Path(destination).write_text(format_metrics(records))
