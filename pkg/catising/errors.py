"""Exception hierarchy. Every class carries the exit code the command line
reports when the error reaches it."""


class CatIsingError(Exception):
    exit_code: int = 1


class ParseError(CatIsingError):
    exit_code = 2

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        context = []
        if line is not None:
            context.append(f"line {line}")
        if key is not None:
            context.append(f"key '{key}'")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)


class ValidationError(CatIsingError):
    exit_code = 2

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DomainError(CatIsingError):
    """Argument outside the domain of an operation."""

    exit_code = 2


class NumericalError(CatIsingError):
    exit_code = 3


class TruncationError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class DimensionMismatch(NumericalError):
    pass


class IntegrationError(NumericalError):
    pass


class EigensolverFailure(NumericalError):
    pass


class DegenerateSteadyState(NumericalError):
    def __init__(self, kernel_dim: int):
        self.kernel_dim = kernel_dim
        super().__init__(
            f"Liouvillian kernel is {kernel_dim}-dimensional;"
            " pass an initial state to select the sector."
        )


class KernelDegeneracy(NumericalError):
    pass


class OracleMismatch(NumericalError):
    pass


class EventCapExceeded(NumericalError):
    pass


class InvariantError(NumericalError):
    """A scan result breaks an ordering the model guarantees."""
