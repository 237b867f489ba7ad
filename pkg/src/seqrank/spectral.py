"""Singular spectra and the effective rank (RankMe) of embedding matrices.

The effective rank of an ``n x d`` matrix ``Z`` with singular values
``s_1 >= ... >= s_min(n,d)`` is ``exp(H(p))`` where ``p = s / sum(s)`` and
``H`` is the Shannon entropy in nats. It is a soft count of the directions
the embeddings actually use: 1 for a rank-one matrix, ``k`` for ``k`` equal
singular values.

All arithmetic is carried out in float64 regardless of the input dtype.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import InputError, NonFiniteError, ZeroEmbeddingError

# singular values below RELATIVE_CUTOFF * s_1 are treated as exact zeros
RELATIVE_CUTOFF = 1e-12
# method="auto" tries the Gram-matrix path when n > GRAM_RATIO * d
GRAM_RATIO = 4
# smallest s_i / s_1 for which the auto path keeps a Gram-path spectrum
GRAM_TRUSTED_CONDITION = 1e-4

Method = Literal["auto", "svd", "gram"]


@dataclass(frozen=True)
class SingularSpectrum:
    """Nonincreasing, nonnegative singular values of an ``n x d`` matrix."""

    values: np.ndarray
    source_dims: tuple[int, int]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise InputError("spectrum must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(values)):
            raise NonFiniteError("spectrum contains non-finite values")
        if np.any(values < 0):
            raise InputError("singular values must be nonnegative")
        if np.any(np.diff(values) > 0):
            raise InputError("singular values must be sorted nonincreasing")
        n, d = self.source_dims
        if values.size != min(n, d):
            raise InputError(
                f"spectrum has {values.size} values, expected min({n}, {d})"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, values) -> "SingularSpectrum":
        """Wrap bare singular values; source dims are taken as ``(k, k)``."""
        values = np.asarray(values, dtype=np.float64)
        return cls(values, (values.size, values.size))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class EffectiveRank:
    value: float
    retained_count: int


def as_matrix(m) -> np.ndarray:
    """Validate an embedding matrix and return it as a float64 array."""
    z = np.asarray(m)
    if z.ndim != 2:
        raise InputError(f"embedding matrix must be 2-D, got shape {z.shape}")
    if z.shape[0] < 1 or z.shape[1] < 1:
        raise InputError(f"embedding matrix must be non-empty, got shape {z.shape}")
    z = z.astype(np.float64, copy=False)
    bad = ~np.isfinite(z)
    if bad.any():
        row, col = (int(i) for i in np.argwhere(bad)[0])
        raise NonFiniteError(
            f"non-finite value {z[row, col]!r} at row {row}, column {col}"
        )
    return z


def _svd_values(z: np.ndarray) -> np.ndarray:
    return np.linalg.svd(z, compute_uv=False)


def _gram_values(z: np.ndarray) -> np.ndarray:
    # Eigenvectors of the smaller Gram matrix are singular vectors of Z.
    # Taking ||Z v_i|| instead of sqrt(lambda_i) keeps the error of a value
    # near eps * s_1**2 / s_i instead of sqrt(eps) * s_1, which is what
    # lets the auto path trust well-conditioned Gram spectra.
    if z.shape[0] < z.shape[1]:
        z = z.T
    _, vecs = np.linalg.eigh(z.T @ z)
    values = np.linalg.norm(z @ vecs, axis=0)
    return np.sort(values)[::-1]


def singular_values(m, method: Method = "auto") -> SingularSpectrum:
    """Singular values of ``m``, nonincreasing, computed in float64.

    ``method="auto"`` tries the Gram-matrix path when ``n > 4 d`` and keeps
    its answer only if every value is at least ``1e-4 * s_1``; anything
    worse conditioned, and any ``n <= 4 d``, goes through a full SVD.
    ``method="gram"`` forces the Gram path, which agrees with the SVD to
    relative 1e-6 in effective rank up to condition number 1e6.
    """
    z = as_matrix(m)
    n, d = z.shape
    if method == "auto":
        if n > GRAM_RATIO * d:
            values = _gram_values(z)
            if values[-1] >= GRAM_TRUSTED_CONDITION * values[0] > 0:
                return SingularSpectrum(values, (n, d))
        method = "svd"
    if method == "svd":
        values = _svd_values(z)
    elif method == "gram":
        values = _gram_values(z)
    else:
        raise ValueError(f"unknown method {method!r}")
    values = np.maximum(values, 0.0)
    return SingularSpectrum(values, (n, d))


def effective_rank(s) -> EffectiveRank:
    """exp of the entropy of the l1-normalized singular values.

    Values below ``1e-12 * s_1`` are dropped before normalizing, and
    ``0 log 0`` is taken as 0. Accepts a :class:`SingularSpectrum` or any
    nonincreasing sequence of nonnegative numbers.
    """
    if not isinstance(s, SingularSpectrum):
        s = SingularSpectrum.from_values(s)
    values = s.values
    top = values[0]
    if top <= 0:
        raise ZeroEmbeddingError()
    kept = values[(values > 0) & (values >= RELATIVE_CUTOFF * top)]
    p = kept / kept.sum()
    entropy = -float(np.sum(p * np.log(p)))
    retained = int(kept.size)
    value = min(max(float(np.exp(entropy)), 1.0), float(retained))
    return EffectiveRank(value, retained)


def rankme(m, method: Method = "auto") -> EffectiveRank:
    """Effective rank of an embedding matrix."""
    return effective_rank(singular_values(m, method=method))
