"""Seeded, cross-language-reproducible sub-sampling of sequence sets.

The generator is SplitMix64 and the selection is a partial Fisher-Yates
shuffle; both are pinned in docs/FORMAT.md so other implementations pick
exactly the same indices for a given ``(n, k, seed)``.
"""

from __future__ import annotations

from ..errors import InputError
from ..temporal import EmbeddingSequenceSet, as_sequence_set

MASK64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        if not 0 <= seed <= MASK64:
            raise InputError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.state = seed

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)`` by rejection (no modulo bias)."""
        threshold = ((1 << 64) - bound) % bound
        while True:
            r = self.next_u64()
            if r >= threshold:
                return r % bound


def sample_indices(n: int, k: int, seed: int) -> list[int]:
    """First ``k`` slots of a partial Fisher-Yates shuffle of ``range(n)``."""
    if not 1 <= k <= n:
        raise InputError(f"sample size k={k} out of range [1, {n}]")
    rng = SplitMix64(seed)
    idx = list(range(n))
    for i in range(k):
        j = i + rng.below(n - i)
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:k]


def sample_sequences(seqs, k: int, seed: int) -> EmbeddingSequenceSet:
    seqs = as_sequence_set(seqs)
    return seqs.subset(sample_indices(len(seqs), k, seed))
