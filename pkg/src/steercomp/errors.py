"""Exception types raised across the package."""


class SteercompError(Exception):
    """Base class for every error the package raises on purpose."""


class SchemaError(SteercompError):
    """A required column or feature name is missing or unknown."""


class DataError(SteercompError):
    """Input data is malformed (bad cell, non-monotone time, non-finite value)."""


class ContractError(SteercompError, ValueError):
    """A caller violated an operation precondition."""


class InsufficientDataError(SteercompError):
    """Not enough samples to carry out the requested computation."""


class DegenerateSpectrumError(SteercompError):
    """The covariance matrix has no variance to decompose."""


class DivergenceError(SteercompError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, member=None):
        self.epoch = epoch
        self.member = member
        where = f"epoch {epoch}" if member is None else f"member {member}, epoch {epoch}"
        super().__init__(f"training diverged (non-finite loss) at {where}")


class UndefinedMetricError(SteercompError):
    """A metric is undefined for the given series (e.g. zero variance)."""


class ConfigurationError(SteercompError):
    """A scenario configuration or model file is inconsistent."""
