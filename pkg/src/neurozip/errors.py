"""Exception types shared across the package.

``UsageError`` subclasses map to CLI exit code 2, everything else to 1.
"""


class NeuroZipError(Exception):
    """Base class for all package errors."""


class UsageError(NeuroZipError):
    """Invalid input supplied by the caller (bad config, bad file, bad id)."""


class DimensionError(NeuroZipError, ValueError):
    pass


class ContractError(NeuroZipError, ValueError):
    pass


class OperatingPointError(UsageError, ValueError):
    pass


class ModelError(NeuroZipError, ValueError):
    pass


class ConfigError(UsageError, ValueError):
    pass


class ParseError(UsageError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(UsageError, ValueError):
    pass


class SplitError(UsageError, ValueError):
    pass


class CheckpointError(UsageError, ValueError):
    pass


class DivergenceError(NeuroZipError, FloatingPointError):
    def __init__(self, epoch, param_norms):
        self.epoch = epoch
        self.param_norms = dict(param_norms)
        norms = ", ".join(f"{k}={v:.3g}" for k, v in self.param_norms.items())
        super().__init__(f"loss became non-finite at epoch {epoch}; parameter norms: {norms}")
