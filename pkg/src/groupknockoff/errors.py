"""Exception types shared across the package."""


class DataValidationError(ValueError):
    """Input data violates a documented contract (shapes, finiteness, labels)."""


class NumericalError(RuntimeError):
    """A computation cannot proceed for numerical reasons (singularity, non-PSD)."""
