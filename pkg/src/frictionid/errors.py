"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A requested setup violates a documented precondition."""


class ContractViolation(ValueError):
    """An internal call contract was broken (mismatched shapes, stale inputs)."""


class DomainExcursionError(RuntimeError):
    """The flux field left the numerically representable range during a solve."""

    def __init__(self, message: str, value: float, step: int):
        super().__init__(message)
        self.value = value
        self.step = step


class NumericalBreakdownError(RuntimeError):
    """An iterative solver produced non-finite quantities."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration
