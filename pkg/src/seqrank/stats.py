"""Kendall's tau-b between ranks and downstream performance.

Pair counts use Knight's sort-and-count-inversions scheme, O(n log n).
Significance is an exact permutation test for n <= 8 and the normal
approximation with tie-adjusted variance above that.
"""

from __future__ import annotations

import enum
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InputError
from .ingest.metrics import DownstreamRecord, Orientation

EXACT_MAX_N = 8


def orient(record: DownstreamRecord) -> float:
    """Metric value signed so that larger always means better."""
    if record.orientation is Orientation.LOWER_IS_BETTER:
        return -record.metric_value
    return record.metric_value


@dataclass(frozen=True)
class CorrelationResult:
    """Kendall's tau-b for one set of paired observations.

    ``tau`` and ``p_value`` are None when either side is constant
    (``degenerate``). Tie counts are numbers of tied pairs; ``ties_x`` and
    ``ties_y`` include pairs tied on both sides, which ``ties_xy`` counts.
    """

    tau: Optional[float]
    p_value: Optional[float]
    n_pairs: int
    concordant: int
    discordant: int
    ties_x: int
    ties_y: int
    ties_xy: int
    p_method: Optional[str] = None

    @property
    def degenerate(self) -> bool:
        return self.tau is None


def _tied_pairs(changes: np.ndarray) -> tuple[int, list[int]]:
    """Tied-pair count and tie-group sizes of a sorted run.

    ``changes[i]`` is True where element ``i + 1`` differs from element ``i``.
    """
    breaks = np.flatnonzero(changes) + 1
    sizes = np.diff(np.concatenate([[0], breaks, [changes.size + 1]]))
    groups = [int(t) for t in sizes if t > 1]
    return sum(t * (t - 1) // 2 for t in groups), groups


def _count_inversions(values: list) -> int:
    """Pairs i < j with values[i] > values[j] (strict), by bottom-up merge sort."""
    items = list(values)
    n = len(items)
    buf = [None] * n
    inversions = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if items[i] <= items[j]:
                    buf[k] = items[i]
                    i += 1
                else:
                    buf[k] = items[j]
                    inversions += mid - i
                    j += 1
                k += 1
            buf[k : k + mid - i] = items[i:mid]
            k += mid - i
            buf[k : k + hi - j] = items[j:hi]
        items, buf = buf, items
        width *= 2
    return inversions


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite values")
    return arr


def _exact_p(x: np.ndarray, y: np.ndarray, score: int) -> float:
    """Two-sided permutation p-value over all n! reorderings of ``y``."""
    n = x.size
    i, j = np.triu_indices(n, k=1)
    sx = np.sign(x[i] - x[j]).astype(np.int64)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    yp = y[perms]
    sy = np.sign(yp[:, i] - yp[:, j]).astype(np.int64)
    scores = sy @ sx
    return float(np.count_nonzero(np.abs(scores) >= abs(score)) / len(perms))


def _normal_p(n: int, score: int, x_groups: list[int], y_groups: list[int]) -> float:
    v0 = n * (n - 1) * (2 * n + 5)
    vt = sum(t * (t - 1) * (2 * t + 5) for t in x_groups)
    vu = sum(u * (u - 1) * (2 * u + 5) for u in y_groups)
    var = (v0 - vt - vu) / 18.0
    var += (sum(t * (t - 1) for t in x_groups) * sum(u * (u - 1) for u in y_groups)) / (
        2.0 * n * (n - 1)
    )
    if n > 2:
        var += (
            sum(t * (t - 1) * (t - 2) for t in x_groups)
            * sum(u * (u - 1) * (u - 2) for u in y_groups)
        ) / (9.0 * n * (n - 1) * (n - 2))
    if var <= 0:
        return 1.0
    z = score / math.sqrt(var)
    return min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))


def kendall_tau(xs: Sequence[float], ys: Sequence[float]) -> CorrelationResult:
    """Kendall's tau-b of paired observations, with tie counts and a p-value."""
    x = _as_vector(xs, "xs")
    y = _as_vector(ys, "ys")
    if x.size != y.size:
        raise InputError(f"length mismatch: {x.size} xs vs {y.size} ys")
    n = int(x.size)
    if n < 2:
        raise InputError(f"kendall_tau needs at least 2 observations, got {n}")

    order = np.lexsort((y, x))
    x_sorted, y_by_x = x[order], y[order]
    x_changes = x_sorted[1:] != x_sorted[:-1]
    y_sorted = np.sort(y)
    ties_x, x_groups = _tied_pairs(x_changes)
    ties_y, y_groups = _tied_pairs(y_sorted[1:] != y_sorted[:-1])
    ties_xy, _ = _tied_pairs(x_changes | (y_by_x[1:] != y_by_x[:-1]))
    discordant = _count_inversions(y_by_x.tolist())
    total = n * (n - 1) // 2
    concordant = total - ties_x - ties_y + ties_xy - discordant

    untied_x = total - ties_x
    untied_y = total - ties_y
    if untied_x == 0 or untied_y == 0:
        return CorrelationResult(
            None, None, n, concordant, discordant, ties_x, ties_y, ties_xy
        )
    score = concordant - discordant
    tau = score / math.sqrt(untied_x * untied_y)
    tau = max(-1.0, min(1.0, tau))
    if n <= EXACT_MAX_N:
        p, method = _exact_p(x, y, score), "exact"
    else:
        p, method = _normal_p(n, score, x_groups, y_groups), "normal"
    return CorrelationResult(
        tau, p, n, concordant, discordant, ties_x, ties_y, ties_xy, method
    )


class Grouping(enum.Enum):
    PER_LAYER = "per_layer"
    POOLED = "pooled"
    PER_TASK = "per_task"
    PER_LAYER_AND_TASK = "per_layer_and_task"


@dataclass(frozen=True)
class Observation:
    """One joined (rank, oriented performance) point."""

    run_id: str
    step: int
    layer: int
    task: str
    rank: float
    performance: float


GroupKey = tuple  # tuple of (field, value) pairs; () for the pooled group


def group_key(obs: Observation, grouping: Grouping) -> GroupKey:
    if grouping is Grouping.PER_LAYER:
        return (("layer", obs.layer),)
    if grouping is Grouping.PER_TASK:
        return (("task", obs.task),)
    if grouping is Grouping.PER_LAYER_AND_TASK:
        return (("layer", obs.layer), ("task", obs.task))
    return ()


def group_label(key: GroupKey) -> str:
    if not key:
        return "all"
    return "/".join(f"{field}={value}" for field, value in key)


@dataclass(frozen=True)
class GroupResult:
    key: GroupKey
    result: CorrelationResult

    @property
    def label(self) -> str:
        return group_label(self.key)

    @property
    def size(self) -> int:
        return self.result.n_pairs


@dataclass(frozen=True)
class GroupedCorrelations:
    grouping: Grouping
    groups: list[GroupResult]
    insufficient: list[tuple[GroupKey, int]]


def _as_observation(item) -> Observation:
    if isinstance(item, Observation):
        return item
    rank, metric = item
    if (rank.run_id, rank.step, rank.layer) != (metric.run_id, metric.step, metric.layer):
        raise InputError(
            f"pair keys differ: rank {(rank.run_id, rank.step, rank.layer)} "
            f"vs metric {(metric.run_id, metric.step, metric.layer)}"
        )
    return Observation(
        rank.run_id, rank.step, rank.layer, metric.task, rank.rank_value, orient(metric)
    )


def tau_by_group(observations: Iterable, grouping: Grouping) -> GroupedCorrelations:
    """Kendall's tau-b of rank vs. performance within each group.

    Accepts :class:`Observation` items (performance already oriented) or
    ``(RankRecord, DownstreamRecord)`` pairs, which are oriented here.
    Groups with fewer than two observations go to ``insufficient``.
    """
    grouping = Grouping(grouping)
    buckets: dict[GroupKey, list[Observation]] = defaultdict(list)
    for item in observations:
        obs = _as_observation(item)
        buckets[group_key(obs, grouping)].append(obs)
    groups, insufficient = [], []
    for key in sorted(buckets):
        members = buckets[key]
        if len(members) < 2:
            insufficient.append((key, len(members)))
            continue
        res = kendall_tau([o.rank for o in members], [o.performance for o in members])
        groups.append(GroupResult(key, res))
    return GroupedCorrelations(grouping, groups, insufficient)
