"""Exception hierarchy shared by every lfsr module."""


class LFSRError(Exception):
    """Base class for all errors raised by lfsr."""


class DataValidationError(LFSRError, ValueError):
    """Sample values are out of range or non-finite."""


class DimensionError(LFSRError, ValueError):
    """Array dimensions violate an operation's precondition."""


class ShapeError(DimensionError):
    """Tensor shapes do not match (channels, factorisation, layout)."""


class ParameterError(LFSRError, ValueError):
    pass


class LFIndexError(LFSRError, IndexError):
    pass


class ContractError(LFSRError, RuntimeError):
    """An operation was called outside its contract (e.g. backward on a non-scalar)."""


class LoadError(LFSRError):
    """Base class for light field container read failures."""


class MissingViewError(LoadError):
    def __init__(self, u, v, path):
        super().__init__(f"missing view ({u}, {v}): {path}")
        self.u, self.v, self.path = u, v, path


class InconsistentDimensionsError(LoadError):
    pass


class MalformedMetadataError(LoadError):
    pass


class ConfigurationError(LFSRError):
    """Missing or mismatched checkpoints/configuration."""


class DivergenceError(LFSRError):
    """Training produced a non-finite loss."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record
