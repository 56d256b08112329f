from typing import Optional


class ZeroNormError(ValueError):
    """Raised when a deviation has no norm left to compare (e.g. fully crushed)."""


class SequenceSchemaError(ValueError):
    """Raised for a malformed sequence file; the message names the field."""

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f"{field}: {message}")


class SolverError(RuntimeError):
    """Raised when a template solve misses its fidelity threshold."""

    def __init__(self, message: str, fidelity: Optional[float] = None) -> None:
        self.fidelity = fidelity
        super().__init__(message)
