class ConfigurationError(ValueError):
    """Parameters violate a scheme's structural requirements."""


class EnumerationLimitError(RuntimeError):
    """An exact computation would exceed the configured enumeration budget."""


class ConsistencyError(AssertionError):
    """An internal invariant failed; indicates a bug or corrupted input."""
