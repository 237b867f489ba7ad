"""RankMe-t: effective rank of temporally pooled embedding sequences.

A set of ``n`` sequences, the ``i``-th of shape ``(T_i, d)``, is reduced to an
``n x d`` matrix by summing each sequence over time; the effective rank of
that matrix is RankMe-t. Summing zero-padded per-timestep matrices gives the
same matrix, which :func:`padded_stack_sum` computes the long way round.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

from .errors import DimensionMismatchError, InputError, NonFiniteError
from .spectral import EffectiveRank, Method, rankme

Pooling = Literal["sum", "mean"]


@dataclass(frozen=True, eq=False)
class EmbeddingSequenceSet:
    """``n`` variable-length sequences of ``d``-dimensional frame embeddings.

    Sequences keep the dtype they were given (float32 dumps stay float32);
    pooling always accumulates in float64.
    """

    sequences: tuple[np.ndarray, ...]

    def __post_init__(self):
        seqs = tuple(np.asarray(s) for s in self.sequences)
        if not seqs:
            raise InputError("sequence set must contain at least one sequence")
        for i, s in enumerate(seqs):
            if s.ndim != 2:
                raise InputError(f"sequence {i} must be 2-D (length, dim), got shape {s.shape}")
            if s.shape[0] < 1:
                raise InputError(f"sequence {i} is empty")
        dim = seqs[0].shape[1]
        if dim < 1:
            raise InputError("embedding dimension must be at least 1")
        for i, s in enumerate(seqs):
            if s.shape[1] != dim:
                raise DimensionMismatchError(
                    f"sequence {i} has dimension {s.shape[1]}, expected {dim}"
                )
        for i, s in enumerate(seqs):
            bad = ~np.isfinite(s)
            if bad.any():
                t, c = (int(k) for k in np.argwhere(bad)[0])
                raise NonFiniteError(
                    f"non-finite value in sequence {i} at frame {t}, column {c}"
                )
        object.__setattr__(self, "sequences", seqs)

    @property
    def dim(self) -> int:
        return self.sequences[0].shape[1]

    @property
    def lengths(self) -> list[int]:
        return [s.shape[0] for s in self.sequences]

    @property
    def max_length(self) -> int:
        return max(self.lengths)

    def __len__(self) -> int:
        return len(self.sequences)

    def __getitem__(self, i):
        return self.sequences[i]

    def __eq__(self, other):
        if not isinstance(other, EmbeddingSequenceSet):
            return NotImplemented
        if len(self) != len(other):
            return False
        return all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in zip(self.sequences, other.sequences)
        )

    def subset(self, indices: Iterable[int]) -> "EmbeddingSequenceSet":
        return EmbeddingSequenceSet(tuple(self.sequences[i] for i in indices))


def as_sequence_set(seqs) -> EmbeddingSequenceSet:
    if isinstance(seqs, EmbeddingSequenceSet):
        return seqs
    return EmbeddingSequenceSet(tuple(seqs))


def temporal_pool(seqs) -> np.ndarray:
    """``n x d`` matrix whose row ``i`` is the frame sum of sequence ``i``.

    Each row is accumulated frame by frame in index order in float64, so the
    result is bit-for-bit reproducible.
    """
    seqs = as_sequence_set(seqs)
    out = np.empty((len(seqs), seqs.dim), dtype=np.float64)
    for i, s in enumerate(seqs.sequences):
        # add.reduce may switch to pairwise summation depending on memory
        # layout; accumulate is always a left-to-right scan
        out[i] = np.add.accumulate(s.astype(np.float64, copy=False), axis=0)[-1]
    return out


def padded_stack_sum(seqs) -> np.ndarray:
    """``Z^1 + ... + Z^Tmax`` over zero-padded per-timestep matrices.

    Per-timestep matrices are streamed one at a time rather than stacked, so
    memory stays ``O(n d)``. Equal to :func:`temporal_pool` exactly.
    """
    seqs = as_sequence_set(seqs)
    lengths = np.array(seqs.lengths)
    frames = np.concatenate([s.astype(np.float64, copy=False) for s in seqs.sequences])
    offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    total = np.zeros((len(seqs), seqs.dim), dtype=np.float64)
    for t in range(seqs.max_length):
        z_t = np.zeros_like(total)
        alive = lengths > t
        z_t[alive] = frames[offsets[alive] + t]
        total += z_t
    return total


def mean_pool(seqs) -> np.ndarray:
    """Frame sum of each sequence divided by its own length."""
    seqs = as_sequence_set(seqs)
    pooled = temporal_pool(seqs)
    return pooled / np.array(seqs.lengths, dtype=np.float64)[:, None]


def rankme_t(seqs, pool: Pooling = "sum", method: Method = "auto") -> EffectiveRank:
    """RankMe-t of a sequence set; ``pool="mean"`` opts into per-sequence means."""
    if pool == "sum":
        return rankme(temporal_pool(seqs), method=method)
    if pool == "mean":
        return rankme(mean_pool(seqs), method=method)
    raise ValueError(f"unknown pooling {pool!r}")


def rankme_t_mean(seqs, method: Method = "auto") -> EffectiveRank:
    return rankme_t(seqs, pool="mean", method=method)
