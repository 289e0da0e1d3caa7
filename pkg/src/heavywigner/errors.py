"""Exception hierarchy shared by the engines and the command line."""


class HeavyWignerError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(HeavyWignerError, ValueError):
    """An input is outside the domain of an operation."""


class ParseError(DomainError):
    """A word, graph or parameter string failed to parse."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class TruncationError(DomainError):
    """A computation needs a parameter a_{j,k} beyond the stored truncation."""

    def __init__(self, color: int, needed_k: int, k_max: int):
        self.color = color
        self.needed_k = needed_k
        self.k_max = k_max
        super().__init__(
            f"parameter a[{color},{needed_k}] is needed but the truncation order is k_max={k_max}"
        )


class UnsupportedModelError(DomainError):
    """The requested y-model is not supported by this engine."""


class ResourceError(HeavyWignerError, RuntimeError):
    """A configured resource cap (partitions, nodes, order) would be exceeded."""
