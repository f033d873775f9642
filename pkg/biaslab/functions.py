# biaslab/functions.py
# The small function library used by nonlinear outcome equations
# Y = f(x) + u*g(x) + e. Derivatives are exact, never numerical.

import re
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P

from config import config
from biaslab.errors import DomainError, ModelSpecError


@dataclass(frozen=True)
class Polynomial:
    # a0 + a1*x + a2*x^2 + ...
    coefficients: Tuple[float, ...]

    def __call__(self, x, strict: bool = True):
        return P.polyval(x, self.coefficients)

    def derivative(self, x, strict: bool = True):
        return P.polyval(x, P.polyder(self.coefficients)) if len(self.coefficients) > 1 else x * 0.0

    def __str__(self) -> str:
        return "poly:" + ",".join(f"{c:g}" for c in self.coefficients)


@dataclass(frozen=True)
class Reciprocal:
    # A / x, undefined at zero.
    scale: float

    def _check(self, x):
        if np.any(np.abs(x) < config.RECIPROCAL_GUARD):
            raise DomainError(f"reciprocal function is undefined for |x| < {config.RECIPROCAL_GUARD:g}")

    def __call__(self, x, strict: bool = True):
        if strict:
            self._check(x)
        return self.scale / x

    def derivative(self, x, strict: bool = True):
        if strict:
            self._check(x)
        return -self.scale / (x * x)

    def __str__(self) -> str:
        return f"reciprocal:{self.scale:g}"


@dataclass(frozen=True)
class Constant:
    k: float

    def __call__(self, x, strict: bool = True):
        return x * 0.0 + self.k

    def derivative(self, x, strict: bool = True):
        return x * 0.0

    def __str__(self) -> str:
        return f"constant:{self.k:g}"


FunctionSpec = Union[Polynomial, Reciprocal, Constant]

_FUNCTION_PATTERN = re.compile(r"^(poly|reciprocal|constant)\s*:\s*(.+)$", re.IGNORECASE)


def parse_function(text: str, line: Optional[int] = None) -> FunctionSpec:
    """
    Parses 'poly:a0,a1,...', 'reciprocal:A' or 'constant:k'.
    """
    match = _FUNCTION_PATTERN.match(text.strip())
    if not match:
        raise ModelSpecError(line, f"cannot parse function '{text}' (expected poly:, reciprocal: or constant:)")
    kind, args = match.group(1).lower(), match.group(2)
    try:
        values = tuple(float(a) for a in args.split(","))
    except ValueError:
        raise ModelSpecError(line, f"function arguments '{args}' are not numbers") from None

    if kind == "poly":
        return Polynomial(values)
    if len(values) != 1:
        raise ModelSpecError(line, f"{kind} takes exactly one argument, got {len(values)}")
    return Reciprocal(values[0]) if kind == "reciprocal" else Constant(values[0])
