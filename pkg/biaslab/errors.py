# biaslab/errors.py
# Exception hierarchy shared by every module. Each error knows the CLI exit
# code it maps to: 1 for usage errors, 2 for model/data errors, 3 for
# internal invariant violations.

from typing import Optional


class BiasLabError(Exception):
    exit_code: int = 2

    def __init__(self, message: str):
        self.message = message
        super().__init__(message)

    @property
    def kind(self) -> str:
        # "InfeasibleStandardizationError" -> "InfeasibleStandardization"
        return type(self).__name__.removesuffix("Error")


class UsageError(BiasLabError):
    exit_code = 1


class InvariantViolationError(BiasLabError):
    exit_code = 3


# --- Model construction ---

class ModelSpecError(BiasLabError):
    def __init__(self, line: Optional[int], message: str):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class CyclicGraphError(BiasLabError):
    def __init__(self, cycle: list):
        self.cycle = cycle
        path = " -> ".join([str(p) for p, _ in cycle] + [str(cycle[0][0])]) if cycle else "?"
        super().__init__(f"graph contains a cycle: {path}")


class UnknownNodeError(BiasLabError):
    def __init__(self, node: str):
        self.node = node
        super().__init__(f"unknown node '{node}'")


class InfeasibleStandardizationError(BiasLabError):
    def __init__(self, node: str, deficit: float):
        self.node = node
        self.deficit = deficit
        super().__init__(
            f"node '{node}' cannot be standardized: explained variance exceeds 1 by {deficit:.6g}"
        )


class InfeasibleModelError(BiasLabError):
    pass


# --- Algebra ---

class SingularDesignError(BiasLabError):
    pass


class DegenerateInstrumentError(BiasLabError):
    def __init__(self, c3: float):
        self.c3 = c3
        super().__init__(f"instrument strength |c3| = {abs(c3):.6g} must be < 1")


class DegenerateSelectionError(BiasLabError):
    def __init__(self, value: float):
        self.value = value
        super().__init__(f"(beta1 + c0*beta2)^2 = {value:.6g} must be < 1")


class DomainError(BiasLabError):
    pass


class NonpositiveVarianceError(BiasLabError):
    pass


# --- Data ---

class UnknownColumnError(BiasLabError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"unknown column '{column}'")


class EmptySelectionError(BiasLabError):
    pass


class InsufficientDataError(BiasLabError):
    pass


class DataFormatError(BiasLabError):
    pass


# --- Queries ---

class InvalidQueryError(BiasLabError):
    pass


class InvalidInstrumentError(BiasLabError):
    pass
