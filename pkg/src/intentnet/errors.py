"""Exception types shared across the package."""


class CorpusError(ValueError):
    """Raised for malformed corpus files, unknown labels, or split/model mismatches."""


class NumericError(RuntimeError):
    """Raised when training or checking hits a non-finite value."""


class ContainerError(ValueError):
    """Raised for corrupt or incompatible model files."""
