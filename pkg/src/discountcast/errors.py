"""Shared exception types."""


class ParseError(ValueError):
    """Malformed instance file. Carries the offending path and 1-based line number."""

    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


class ValidationError(ValueError):
    """Structurally well-formed input that violates a model requirement."""


class TooLargeError(ValueError):
    """Instance exceeds an enumeration cap of an exact routine."""


class PolicyContractError(RuntimeError):
    """A policy asked for a probe the current state does not permit."""
