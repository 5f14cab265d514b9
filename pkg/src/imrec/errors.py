"""Exception types shared across the package.

The CLI maps these onto exit codes: DataError (and subclasses) -> 2,
TransportError and OSError -> 3, argparse usage failures -> 1.
"""


class DataError(Exception):
    """Malformed, inconsistent, or degenerate input data."""


class ArtifactError(DataError):
    """A model artifact failed validation (version, integrity, invariants)."""


class TransportError(Exception):
    """An HTTP exchange failed after retries, or a cache replay missed."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status
