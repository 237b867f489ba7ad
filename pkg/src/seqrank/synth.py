"""Synthetic embedding dumps with planted singular spectra.

Everything here is an oracle for the rest of the package: a planted matrix
has exactly the requested singular values (to ~1e-12), and a planted sequence
set pools back to that matrix, so its RankMe-t is known in closed form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InputError
from .ingest.container import write_container
from .ingest.metrics import DownstreamRecord, Orientation, write_metrics
from .monitor.manifest import RunManifest, default_container_path
from .spectral import effective_rank
from .temporal import EmbeddingSequenceSet

# frame shares are multiples of 2**-SHARE_BITS, so they sum to 1 exactly
SHARE_BITS = 20

SIDECAR_NAME = "planned_ranks.csv"
MANIFEST_NAME = "manifest.json"
METRICS_NAME = "metrics.csv"


@dataclass(frozen=True)
class LengthLaw:
    """Sequence lengths drawn uniformly from ``[min_length, max_length]``."""

    min_length: int = 1
    max_length: int = 1

    def __post_init__(self):
        if not 1 <= self.min_length <= self.max_length:
            raise InputError(f"invalid length range [{self.min_length}, {self.max_length}]")
        if self.max_length > 2**SHARE_BITS:
            raise InputError(f"sequence length {self.max_length} exceeds {2**SHARE_BITS}")

    @classmethod
    def constant(cls, length: int) -> "LengthLaw":
        return cls(length, length)

    @classmethod
    def uniform(cls, lo: int, hi: int) -> "LengthLaw":
        return cls(lo, hi)

    @classmethod
    def parse(cls, spec) -> "LengthLaw":
        if isinstance(spec, int):
            return cls.constant(spec)
        lo, hi = spec
        return cls(int(lo), int(hi))


@dataclass(frozen=True)
class SpectrumPlan:
    target_sigmas: tuple[float, ...]
    n: int
    d: int
    lengths: LengthLaw = LengthLaw()
    seed: int = 0

    def __post_init__(self):
        sig = tuple(float(s) for s in self.target_sigmas)
        object.__setattr__(self, "target_sigmas", sig)
        if self.n < 1 or self.d < 1:
            raise InputError(f"n and d must be positive, got n={self.n}, d={self.d}")
        if not sig:
            raise InputError("target_sigmas must be nonempty")
        if len(sig) > min(self.n, self.d):
            raise InputError(
                f"{len(sig)} planted singular values exceed min(n, d) = {min(self.n, self.d)}"
            )
        if any(s < 0 or not np.isfinite(s) for s in sig):
            raise InputError("planted singular values must be finite and nonnegative")
        if any(b > a for a, b in zip(sig, sig[1:])):
            raise InputError("planted singular values must be nonincreasing")

    @property
    def planned_rank(self) -> float:
        return effective_rank(np.array(self.target_sigmas)).value


def orthonormal_columns(a: np.ndarray, passes: int = 2) -> np.ndarray:
    """Orthonormalize the columns of ``a`` by modified Gram-Schmidt.

    The whole sweep is repeated ``passes`` times; the second pass brings the
    loss of orthogonality down to machine precision.
    """
    q = np.array(a, dtype=np.float64)
    r = q.shape[1]
    for _ in range(passes):
        for j in range(r):
            norm = np.linalg.norm(q[:, j])
            if norm == 0:
                raise InputError("cannot orthonormalize rank-deficient columns")
            q[:, j] /= norm
            if j + 1 < r:
                q[:, j + 1 :] -= np.outer(q[:, j], q[:, j] @ q[:, j + 1 :])
    return q


def plant_matrix(plan: SpectrumPlan) -> np.ndarray:
    """``U diag(sigmas) V^T`` with seeded orthonormal ``U`` (n x r), ``V`` (d x r)."""
    rng = np.random.default_rng([plan.seed, 0])
    r = len(plan.target_sigmas)
    u = orthonormal_columns(rng.standard_normal((plan.n, r)))
    v = orthonormal_columns(rng.standard_normal((plan.d, r)))
    return (u * np.array(plan.target_sigmas)) @ v.T


def _frame_shares(rng: np.random.Generator, length: int) -> np.ndarray:
    if length == 1:
        return np.ones(1)
    total = 2**SHARE_BITS
    cuts = np.sort(rng.choice(total - 1, size=length - 1, replace=False) + 1)
    parts = np.diff(np.concatenate([[0], cuts, [total]]))
    return parts / total


def plant_sequences(plan: SpectrumPlan) -> EmbeddingSequenceSet:
    """Split each planted row across its frames by random convex shares."""
    matrix = plant_matrix(plan)
    rng = np.random.default_rng([plan.seed, 1])
    lo, hi = plan.lengths.min_length, plan.lengths.max_length
    lengths = rng.integers(lo, hi + 1, size=plan.n)
    seqs = []
    for row, length in zip(matrix, lengths):
        shares = _frame_shares(rng, int(length))
        seqs.append(shares[:, None] * row[None, :])
    return EmbeddingSequenceSet(tuple(seqs))


@dataclass(frozen=True)
class MetricPlan:
    """A planted downstream metric: ``score = layer_bias[layer] + slope * rank``.

    The written metric is ``intercept + score`` for higher-is-better tasks and
    ``intercept - score`` for lower-is-better ones, so the oriented metric is
    always increasing in rank within a layer when ``slope > 0``.
    """

    task: str
    orientation: Orientation = Orientation.HIGHER_IS_BETTER
    slope: float = 1.0
    intercept: float = 0.0
    layer_bias: dict = field(default_factory=dict)

    def value(self, layer: int, rank: float) -> float:
        score = self.layer_bias.get(layer, 0.0) + self.slope * rank
        if self.orientation is Orientation.LOWER_IS_BETTER:
            return self.intercept - score
        return self.intercept + score


@dataclass(frozen=True)
class TrajectoryPlan:
    """A synthetic training run whose spectra flatten as training proceeds.

    Each (step, layer) cell plants a geometric spectrum ``exp(-decay * j)``,
    ``j < min(n, d)``. The decay moves linearly from ``decay_start`` at the
    first step to ``decay_end`` at the last, shifted per layer by
    ``layer_offsets``; a smaller decay means a flatter spectrum and a higher
    rank. ``sigmas`` overrides individual cells.
    """

    steps: tuple[int, ...]
    layers: tuple[int, ...]
    n: int
    d: int
    run_id: str = "synth"
    lengths: LengthLaw = LengthLaw()
    seed: int = 0
    decay_start: float = 1.0
    decay_end: float = 0.1
    layer_offsets: dict = field(default_factory=dict)
    sigmas: dict = field(default_factory=dict)
    sample_k: Optional[int] = None
    sample_seed: int = 0
    dtype: int = 1
    hyper_params: dict = field(default_factory=dict)
    metrics: tuple[MetricPlan, ...] = ()

    def __post_init__(self):
        steps, layers = tuple(self.steps), tuple(self.layers)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "layers", layers)
        for name, seq in (("steps", steps), ("layers", layers)):
            if not seq or any(b <= a for a, b in zip(seq, seq[1:])):
                raise InputError(f"{name} must be nonempty and strictly increasing")

    def decay(self, step: int, layer: int) -> float:
        i = self.steps.index(step)
        frac = i / (len(self.steps) - 1) if len(self.steps) > 1 else 1.0
        value = self.decay_start + frac * (self.decay_end - self.decay_start)
        value += self.layer_offsets.get(layer, 0.0)
        if value < 0:
            raise InputError(f"negative spectral decay {value} at step {step}, layer {layer}")
        return value

    def spectrum_plan(self, step: int, layer: int) -> SpectrumPlan:
        if (step, layer) in self.sigmas:
            sigmas = tuple(self.sigmas[(step, layer)])
        else:
            r = min(self.n, self.d)
            sigmas = tuple(np.exp(-self.decay(step, layer) * np.arange(r)))
        cell_seed = int(
            np.random.SeedSequence([self.seed, step, layer]).generate_state(1, np.uint64)[0]
        )
        return SpectrumPlan(sigmas, self.n, self.d, self.lengths, cell_seed)

    @classmethod
    def from_dict(cls, doc: dict) -> "TrajectoryPlan":
        decay = doc.get("decay", {})
        metrics = tuple(
            MetricPlan(
                task=m["task"],
                orientation=Orientation(m.get("orientation", "higher")),
                slope=float(m.get("slope", 1.0)),
                intercept=float(m.get("intercept", 0.0)),
                layer_bias={int(k): float(v) for k, v in m.get("layer_bias", {}).items()},
            )
            for m in doc.get("metrics", [])
        )
        sigmas = {}
        for key, values in doc.get("sigmas", {}).items():
            step, layer = (int(p) for p in key.split("/"))
            sigmas[(step, layer)] = [float(v) for v in values]
        try:
            return cls(
                steps=tuple(int(s) for s in doc["steps"]),
                layers=tuple(int(l) for l in doc["layers"]),
                n=int(doc["n"]),
                d=int(doc["d"]),
                run_id=str(doc.get("run_id", "synth")),
                lengths=LengthLaw.parse(doc.get("lengths", 1)),
                seed=int(doc.get("seed", 0)),
                decay_start=float(decay.get("start", 1.0)),
                decay_end=float(decay.get("end", 0.1)),
                layer_offsets={int(k): float(v) for k, v in decay.get("layer_offsets", {}).items()},
                sigmas=sigmas,
                sample_k=doc.get("sample_k"),
                sample_seed=int(doc.get("sample_seed", 0)),
                dtype=int(doc.get("dtype", 1)),
                hyper_params={str(k): str(v) for k, v in doc.get("hyper_params", {}).items()},
                metrics=metrics,
            )
        except KeyError as exc:
            raise InputError(f"trajectory plan is missing field {exc}") from None

    @classmethod
    def load(cls, path) -> "TrajectoryPlan":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(doc)


def planted_metrics(plan: TrajectoryPlan, planned: dict) -> list[DownstreamRecord]:
    records = []
    for m in plan.metrics:
        for (step, layer), rank in sorted(planned.items()):
            records.append(
                DownstreamRecord(plan.run_id, step, layer, m.task, m.value(layer, rank), m.orientation)
            )
    return records


def write_sidecar(planned: dict, path) -> None:
    lines = ["step,layer,planned_rank"]
    lines += [f"{s},{l},{rank!r}" for (s, l), rank in sorted(planned.items())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_sidecar(path) -> dict[tuple[int, int], float]:
    rows = Path(path).read_text().splitlines()
    if not rows or rows[0] != "step,layer,planned_rank":
        raise InputError(f"{path}: not a planned-rank sidecar")
    out = {}
    for row in rows[1:]:
        if row.strip():
            s, l, r = row.split(",")
            out[(int(s), int(l))] = float(r)
    return out


def plant_run(plan: TrajectoryPlan, root) -> RunManifest:
    """Write one container per (step, layer) plus manifest and oracle sidecar.

    Layout under ``root``: ``step-<s>/layer-<l>.rkmt``, ``manifest.json``,
    ``planned_ranks.csv`` and, when the plan has metrics, ``metrics.csv``.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    planned = {}
    for step in plan.steps:
        for layer in plan.layers:
            sp = plan.spectrum_plan(step, layer)
            path = root / default_container_path(step, layer)
            path.parent.mkdir(parents=True, exist_ok=True)
            write_container(plant_sequences(sp), path, dtype=plan.dtype)
            planned[(step, layer)] = sp.planned_rank
    write_sidecar(planned, root / SIDECAR_NAME)
    if plan.metrics:
        write_metrics(planted_metrics(plan, planned), root / METRICS_NAME)
    manifest = RunManifest(
        run_id=plan.run_id,
        root=root,
        layers=list(plan.layers),
        steps=list(plan.steps),
        sample_k=plan.sample_k if plan.sample_k is not None else plan.n,
        sample_seed=plan.sample_seed,
        hyper_params=dict(plan.hyper_params),
        history=root / f"{plan.run_id}.history.jsonl",
    )
    manifest.save(root / MANIFEST_NAME)
    return manifest
