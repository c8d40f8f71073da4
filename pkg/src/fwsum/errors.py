"""Exception types shared across the package."""


class FwsumError(Exception):
    """Base class for errors raised by this package."""


class InputError(FwsumError):
    """Unreadable or malformed input data (documents, embeddings, datasets)."""


class ConfigError(FwsumError):
    """Invalid or inconsistent run configuration."""


class SolverError(FwsumError):
    """Failure inside the sparse-regression solver."""
