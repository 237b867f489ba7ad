from .container import (
    decode_container,
    encode_container,
    read_container,
    write_container,
)
from .metrics import (
    DownstreamRecord,
    Orientation,
    read_metrics,
    write_metrics,
)
from .sampling import SplitMix64, sample_indices, sample_sequences

__all__ = [
    "DownstreamRecord",
    "Orientation",
    "SplitMix64",
    "decode_container",
    "encode_container",
    "read_container",
    "read_metrics",
    "sample_indices",
    "sample_sequences",
    "write_container",
    "write_metrics",
]
