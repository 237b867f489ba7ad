"""Walk a run's embedding dumps and compute RankMe-t per (step, layer)."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from ..errors import ScanError
from ..ingest.container import read_container
from ..ingest.sampling import sample_indices
from ..temporal import rankme_t
from .history import RankRecord, append_history
from .manifest import RunManifest

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Gap:
    step: int
    layer: int
    path: Path


@dataclass
class ScanResult:
    records: list[RankRecord]
    gaps: list[Gap]
    # sampled sequence indices per (step, layer)
    sampled: dict[tuple[int, int], tuple[int, ...]] = field(default_factory=dict)
    history_path: Optional[Path] = None


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _scan_cell(manifest: RunManifest, step: int, layer: int):
    path = manifest.container_path(step, layer)
    if not path.is_file():
        return Gap(step, layer, path)
    seqs = read_container(path)
    if manifest.sample_k > len(seqs):
        raise ScanError(
            f"{path}: sample_k={manifest.sample_k} exceeds the {len(seqs)} sequences in the container"
        )
    idx = sample_indices(len(seqs), manifest.sample_k, manifest.sample_seed)
    rank = rankme_t(seqs.subset(idx))
    record = RankRecord(
        run_id=manifest.run_id,
        step=step,
        layer=layer,
        rank_value=rank.value,
        retained_count=rank.retained_count,
        n_sequences_used=len(idx),
        dim=seqs.dim,
        sample_seed=manifest.sample_seed,
        computed_at=_now(),
    )
    return record, tuple(idx)


def scan_run(
    manifest: RunManifest,
    workers: int = 1,
    history: Optional[Path] = None,
    write_history: bool = True,
) -> ScanResult:
    """Compute a rank record for every (step, layer) cell of ``manifest``.

    Missing containers become gaps. Records are appended to the history
    file (``history`` or the manifest's default) in (step, layer) order once
    every cell has been computed, whatever the worker count.
    """
    if not manifest.root.is_dir():
        raise ScanError(f"run root {manifest.root} is not a readable directory")
    if workers < 1:
        raise ScanError(f"workers must be >= 1, got {workers}")
    cells = manifest.cells()
    if workers == 1:
        outcomes = [_scan_cell(manifest, s, l) for s, l in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda c: _scan_cell(manifest, *c), cells))

    records, gaps, sampled = [], [], {}
    for outcome in outcomes:
        if isinstance(outcome, Gap):
            log.warning("missing container for step %d layer %d: %s", outcome.step, outcome.layer, outcome.path)
            gaps.append(outcome)
            continue
        record, idx = outcome
        records.append(record)
        sampled[(record.step, record.layer)] = idx

    dims: dict[int, tuple[int, int]] = {}
    for r in records:
        first = dims.setdefault(r.layer, (r.step, r.dim))
        if first[1] != r.dim:
            raise ScanError(
                f"layer {r.layer}: dimension {r.dim} at step {r.step} "
                f"differs from {first[1]} at step {first[0]}"
            )

    result = ScanResult(records, gaps, sampled)
    if write_history:
        path = Path(history) if history is not None else manifest.history_path()
        append_history(path, records)
        result.history_path = path
    return result
