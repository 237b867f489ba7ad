"""Rank histories: append-only JSON-lines files of :class:`RankRecord`.

Lines are never rewritten. When a (run, step, layer) appears more than once,
the last line wins at read time.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Iterator

from ..errors import InputError


@dataclass(frozen=True)
class RankRecord:
    run_id: str
    step: int
    layer: int
    rank_value: float
    retained_count: int
    n_sequences_used: int
    dim: int
    sample_seed: int
    computed_at: str

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.run_id, self.step, self.layer)

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_dict(cls, doc: dict) -> "RankRecord":
        return cls(
            run_id=str(doc["run_id"]),
            step=int(doc["step"]),
            layer=int(doc["layer"]),
            rank_value=float(doc["rank_value"]),
            retained_count=int(doc["retained_count"]),
            n_sequences_used=int(doc["n_sequences_used"]),
            dim=int(doc["dim"]),
            sample_seed=int(doc["sample_seed"]),
            computed_at=str(doc["computed_at"]),
        )


def append_history(path, records: Iterable[RankRecord]) -> int:
    """Append records, one JSON object per line. Returns the count written."""
    lines = [r.to_json() + "\n" for r in records]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a") as fh:
        fh.writelines(lines)
    return len(lines)


def iter_history(path) -> Iterator[RankRecord]:
    """Every record in file order, duplicates included."""
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield RankRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: bad history record: {exc}") from None


def latest_wins(records: Iterable[RankRecord]) -> list[RankRecord]:
    """Keep the last record per key, sorted by (run_id, step, layer)."""
    latest = {}
    for r in records:
        latest[r.key] = r
    return [latest[k] for k in sorted(latest)]


def read_history(path) -> list[RankRecord]:
    return latest_wins(iter_history(path))
