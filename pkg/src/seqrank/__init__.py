"""Label-free quality monitoring for sequence-embedding models.

Computes the effective rank (RankMe) of embedding matrices, its temporal
extension RankMe-t for variable-length sequences, scans training-checkpoint
dumps, and correlates ranks with downstream metrics via Kendall's tau-b.
"""

from .errors import (
    ContainerError,
    DimensionMismatchError,
    InputError,
    JoinError,
    ManifestError,
    MetricsError,
    NonFiniteError,
    ScanError,
    ZeroEmbeddingError,
)
from .spectral import EffectiveRank, SingularSpectrum, effective_rank, rankme, singular_values
from .stats import CorrelationResult, Grouping, kendall_tau, orient, tau_by_group
from .temporal import (
    EmbeddingSequenceSet,
    mean_pool,
    padded_stack_sum,
    rankme_t,
    rankme_t_mean,
    temporal_pool,
)

__version__ = "0.1.0"

__all__ = [
    "ContainerError",
    "CorrelationResult",
    "DimensionMismatchError",
    "EffectiveRank",
    "EmbeddingSequenceSet",
    "Grouping",
    "InputError",
    "JoinError",
    "ManifestError",
    "MetricsError",
    "NonFiniteError",
    "ScanError",
    "SingularSpectrum",
    "ZeroEmbeddingError",
    "effective_rank",
    "kendall_tau",
    "mean_pool",
    "orient",
    "padded_stack_sum",
    "rankme",
    "rankme_t",
    "rankme_t_mean",
    "singular_values",
    "tau_by_group",
    "temporal_pool",
]
