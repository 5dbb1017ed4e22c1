__all__ = [
    "DivkitError",
    "RejectedInput",
    "ParseError",
    "DomainError",
    "ExtrapolationError",
    "UnknownIdentifier",
]


class DivkitError(Exception):
    """Base exception for divkit operations."""
    pass


class RejectedInput(DivkitError):
    """Raised when raw values do not form a distribution on the open simplex."""

    def __init__(self, message: str, *, record: int | None = None):
        if record is not None:
            message = f"record {record}: {message}"
        super().__init__(message)
        self.record = record


class ParseError(DivkitError):
    """Raised when an input file or inline value list cannot be parsed."""

    def __init__(self, message: str, *, locus: str | None = None):
        if locus:
            message = f"{locus}: {message}"
        super().__init__(message)
        self.locus = locus


class DomainError(DivkitError):
    """Raised when a function is evaluated outside its domain."""
    pass


class ExtrapolationError(DivkitError):
    """Raised when successive Richardson estimates fail to settle."""
    pass


class UnknownIdentifier(DivkitError):
    """Raised for an unknown measure, chain, or scan function name."""
    pass
