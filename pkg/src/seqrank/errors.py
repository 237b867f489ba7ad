"""Exception hierarchy.

Everything raised on bad user input derives from :class:`InputError`, which
the CLI maps to exit status 2.
"""


class InputError(ValueError):
    """Invalid or unusable input data."""


class NonFiniteError(InputError):
    pass


class ZeroEmbeddingError(InputError):
    def __init__(self, message: str = "zero embedding: rank undefined"):
        super().__init__(message)


class DimensionMismatchError(InputError):
    pass


class ContainerError(InputError):
    """Malformed RKMT container. ``offset`` is the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(message)
        self.offset = offset


class MetricsError(InputError):
    pass


class ManifestError(InputError):
    pass


class JoinError(InputError):
    def __init__(self, message: str, unmatched_ranks=(), unmatched_metrics=()):
        super().__init__(message)
        self.unmatched_ranks = list(unmatched_ranks)
        self.unmatched_metrics = list(unmatched_metrics)


class ScanError(InputError):
    pass
