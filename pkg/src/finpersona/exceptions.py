"""Exception hierarchy shared by every pipeline stage."""


class FinPersonaError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FinPersonaError, ValueError):
    """Invalid configuration values (non-stochastic rows, bad ratios, unknown keys)."""


class DataError(FinPersonaError, ValueError):
    """Input data violates an operation's preconditions."""


class InsufficientDataError(DataError):
    pass


class DegenerateDataError(DataError):
    pass


class DimensionError(FinPersonaError, ValueError):
    """Array widths or shapes do not match what the model expects."""


class DegenerateGeometryError(FinPersonaError, ValueError):
    """Point set has no 2-D extent (all collinear)."""


class InsufficientPointsError(DegenerateGeometryError):
    pass


class ProtocolError(FinPersonaError, RuntimeError):
    """An evaluation protocol was applied to a model it does not support."""


class IngestionError(FinPersonaError, ValueError):
    """Knowledge corpus could not be ingested."""


class GenerationError(FinPersonaError, RuntimeError):
    """Chat-completion transport failed after all retries."""


class ParseError(FinPersonaError, ValueError):
    """Model output could not be repaired into the required JSON object."""


class StageDependencyError(FinPersonaError, FileNotFoundError):
    """A pipeline stage was run before the stage that produces its inputs."""
