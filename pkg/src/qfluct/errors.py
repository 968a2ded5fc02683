"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NumericError(ArithmeticError):
    """A numerical procedure failed to converge or lost its accuracy guarantee."""
