# biaslab/analytic.py
# Closed-form bias calculators: linear amplification by an instrument, the
# imperfect-instrument threshold, nonlinear slopes and biases, selection bias,
# and the attenuation ratio behind the intuition for amplification.

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple

from config import config
from biaslab.corpus import fig1_model, fig2_model, fig3_model
from biaslab.errors import (
    DegenerateInstrumentError,
    DegenerateSelectionError,
    InfeasibleStandardizationError,
    InvariantViolationError,
    ModelSpecError,
    NonpositiveVarianceError,
)
from biaslab.functions import FunctionSpec, Polynomial, Reciprocal, parse_function
from biaslab.modelspec import ModelSpec
from biaslab.scm import CausalGraph, LinearSCM, NodeKind, partial_regression_slope, total_effect

logger = logging.getLogger(__name__)

_TOL = 1e-12


class Classification(str, Enum):
    AMPLIFIER = "Amplifier"
    REDUCER = "Reducer"
    NEUTRAL = "Neutral"
    NEW_BIAS = "NewBias"


@dataclass(frozen=True)
class UProjection:
    # Coefficients of the least-squares projection E(U|x, z) = beta*x + alpha*z.
    beta: float
    alpha: float


@dataclass(frozen=True)
class BiasReport:
    a1: float
    a2: float
    a3: float
    b0: float
    bz: float
    amplification: Optional[float]
    classification: Classification
    details: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        scale = max(1.0, abs(self.a1), abs(self.a2), abs(self.a3))
        if abs(self.b0 - (self.a2 - self.a1)) > 1e-9 * scale or abs(self.bz - (self.a3 - self.a1)) > 1e-9 * scale:
            raise InvariantViolationError(
                f"bias report is inconsistent: b0={self.b0!r}, bz={self.bz!r}, a=({self.a1!r}, {self.a2!r}, {self.a3!r})"
            )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a1": self.a1,
            "a2": self.a2,
            "a3": self.a3,
            "b0": self.b0,
            "bz": self.bz,
            "amplification": self.amplification,
            "classification": self.classification.value,
        }


def _is_zero(value: float) -> bool:
    return math.isclose(value, 0.0, abs_tol=_TOL)


def classify(b0: float, bz: float) -> Classification:
    # Absolute comparison; see reducer_threshold for the signed form.
    if _is_zero(b0) and not _is_zero(bz):
        return Classification.NEW_BIAS
    if math.isclose(abs(bz), abs(b0), rel_tol=_TOL, abs_tol=_TOL):
        return Classification.NEUTRAL
    return Classification.AMPLIFIER if abs(bz) > abs(b0) else Classification.REDUCER


def bias_ratio(b0: float, bz: float) -> Optional[float]:
    return None if _is_zero(b0) else bz / b0


# --- Linear instrument model ---

def u_projection(c1: float, c3: float) -> UProjection:
    if abs(c3) >= 1.0:
        raise DegenerateInstrumentError(c3)
    denom = 1.0 - c3 * c3
    return UProjection(beta=c1 / denom, alpha=-c1 * c3 / denom)


def linear_slopes(c0: float, c1: float, c2: float, c3: float) -> Tuple[float, float, float]:
    projection = u_projection(c1, c3)
    return c0, c0 + c1 * c2, c0 + c2 * projection.beta


def linear_bias_pair(c0: float, c1: float, c2: float, c3: float) -> BiasReport:
    projection = u_projection(c1, c3)
    fig1_model(c0, c1, c2, c3)  # raises when the standardized model is infeasible

    a1, a2, a3 = linear_slopes(c0, c1, c2, c3)
    b0 = c1 * c2
    bz = c2 * projection.beta
    return BiasReport(
        a1=a1,
        a2=a2,
        a3=a3,
        b0=b0,
        bz=bz,
        amplification=1.0 / (1.0 - c3 * c3),
        classification=classify(b0, bz),
        details={"model": "instrument", "beta": projection.beta, "alpha": projection.alpha},
    )


def reducer_threshold(c1: float, c2: float, c3: float) -> float:
    # The direct effect c4 of Z on Y at which the signed biases coincide.
    if abs(c3) >= 1.0:
        raise DegenerateInstrumentError(c3)
    return c3 * c2 * c1 / (1.0 - c3 * c3)


def imperfect_instrument_report(c0: float, c1: float, c2: float, c3: float, c4: float) -> BiasReport:
    projection = u_projection(c1, c3)
    fig2_model(c0, c1, c2, c3, c4)

    b0 = c2 * c1 + c3 * c4
    bz = c2 * projection.beta
    # The signed inequality as usually stated; it presumes positive products.
    signed_reducer = None if c3 == 0 else c4 / c3 >= c2 * c1 / (1.0 - c3 * c3)
    return BiasReport(
        a1=c0,
        a2=c0 + b0,
        a3=c0 + bz,
        b0=b0,
        bz=bz,
        amplification=bias_ratio(b0, bz),
        classification=classify(b0, bz),
        details={
            "model": "imperfect-instrument",
            "signed_reducer": signed_reducer,
            "reducer_threshold": reducer_threshold(c1, c2, c3),
        },
    )


def simpson_reversal(c0: float, c1: float, c2: float, c3: float) -> bool:
    report = linear_bias_pair(c0, c1, c2, c3)
    if _is_zero(report.a2) or _is_zero(report.a3):
        return False
    return math.copysign(1.0, report.a2) != math.copysign(1.0, report.a3)


def attenuation_factor(var_u: float, c: float, var_z: float) -> float:
    """
    Share of a unit change in X = U + cZ that reaches U when Z is left free:
    Var(U) / (Var(U) + c^2 Var(Z)).
    """
    if var_u <= 0:
        raise NonpositiveVarianceError(f"Var(U) must be > 0, got {var_u:g}")
    if var_z < 0:
        raise NonpositiveVarianceError(f"Var(Z) must be >= 0, got {var_z:g}")
    return var_u / (var_u + c * c * var_z)


# --- Nonlinear outcome model ---

@dataclass(frozen=True)
class NonlinearOutcomeModel:
    """
    X = c3*z + c1*u + e'  (standardized)
    Y = f(x) + u*g(x) + e''
    """
    c3: float
    c1: float
    f: FunctionSpec
    g: FunctionSpec
    var_eps_y: float = 1.0
    instrument: str = "Z"
    confounder: str = "U"
    treatment: str = "X"
    outcome: str = "Y"

    def __post_init__(self):
        if abs(self.c3) >= 1.0:
            raise DegenerateInstrumentError(self.c3)
        explained = self.c3 * self.c3 + self.c1 * self.c1
        if explained > 1.0 + config.STANDARDIZATION_TOL:
            raise InfeasibleStandardizationError(self.treatment, explained - 1.0)
        if not math.isfinite(self.var_eps_y) or self.var_eps_y < 0:
            raise NonpositiveVarianceError(f"outcome noise variance must be >= 0, got {self.var_eps_y}")

    @property
    def var_eps_x(self) -> float:
        return max(1.0 - self.c3 * self.c3 - self.c1 * self.c1, 0.0)

    @property
    def columns(self) -> Tuple[str, str, str, str]:
        return (self.instrument, self.confounder, self.treatment, self.outcome)

    @classmethod
    def reciprocal(
        cls, c1: float = 0.5, c3: float = 0.6, scale: float = 1.0, f: Optional[FunctionSpec] = None, var_eps_y: float = 1.0
    ) -> "NonlinearOutcomeModel":
        return cls(c3=c3, c1=c1, f=f or Polynomial((0.0, 1.0)), g=Reciprocal(scale), var_eps_y=var_eps_y)


def nonlinear_slopes(model: NonlinearOutcomeModel, x: float, z: float) -> Tuple[float, float, float]:
    projection = u_projection(model.c1, model.c3)
    fp = float(model.f.derivative(x))
    g = float(model.g(x))
    gp = float(model.g.derivative(x))
    a1 = fp
    a2 = fp + model.c1 * (x * gp + g)
    a3 = fp + projection.beta * (x * gp + g - model.c3 * gp * z)
    return a1, a2, a3


def nonlinear_bias_pair(model: NonlinearOutcomeModel, x: float, z: float) -> BiasReport:
    a1, a2, a3 = nonlinear_slopes(model, x, z)
    gp = float(model.g.derivative(x))
    b0 = model.c1 * (x * gp + float(model.g(x)))
    bz = (b0 - model.c1 * model.c3 * gp * z) / (1.0 - model.c3 * model.c3)
    return BiasReport(
        a1=a1,
        a2=a2,
        a3=a3,
        b0=b0,
        bz=bz,
        amplification=bias_ratio(b0, bz),
        classification=classify(b0, bz),
        details={"model": "nonlinear", "x": x, "z": z, "f": str(model.f), "g": str(model.g)},
    )


def nonlinear_conditional_means(model: NonlinearOutcomeModel, x: float, z: float) -> Tuple[float, float]:
    # E(Y|x) = f(x) + c1*x*g(x);  E(Y|x, z) = f(x) + beta*g(x)*(x - c3*z)
    projection = u_projection(model.c1, model.c3)
    fx = float(model.f(x))
    gx = float(model.g(x))
    return fx + model.c1 * x * gx, fx + projection.beta * gx * (x - model.c3 * z)


def build_nonlinear_model(spec: ModelSpec) -> NonlinearOutcomeModel:
    outcome = spec.outcome
    if outcome is None:
        raise ModelSpecError(None, "model has no [outcome] section")
    if not spec.standardized:
        raise ModelSpecError(outcome.line, "nonlinear outcome models require standardized = true")

    graph = CausalGraph(spec.variables, [(e.parent, e.child) for e in spec.edges])
    parents = graph.parents(outcome.treatment)
    observed = [p for p in parents if graph.kind(p) == NodeKind.OBSERVED]
    latent = [p for p in parents if graph.kind(p) == NodeKind.LATENT]
    if len(observed) != 1 or len(latent) != 1 or len(parents) != 2:
        raise ModelSpecError(
            outcome.line, f"'{outcome.treatment}' needs exactly one observed instrument and one latent confounder as parents"
        )
    expected = {observed[0], latent[0], outcome.treatment, outcome.node}
    if set(graph.nodes) != expected or len(graph.edges) != 2:
        raise ModelSpecError(
            outcome.line, "nonlinear models contain only instrument -> treatment <- confounder edges; the outcome is defined by f and g"
        )

    coefficients = {(e.parent, e.child): e.coefficient for e in spec.edges}
    return NonlinearOutcomeModel(
        c3=coefficients[(observed[0], outcome.treatment)],
        c1=coefficients[(latent[0], outcome.treatment)],
        f=parse_function(outcome.f, outcome.line),
        g=parse_function(outcome.g, outcome.line),
        var_eps_y=outcome.noise_variance,
        instrument=observed[0],
        confounder=latent[0],
        treatment=outcome.treatment,
        outcome=outcome.node,
    )


# --- Selection model ---

def selection_bias(c0: float, beta1: float, beta2: float) -> float:
    a = beta1 + c0 * beta2
    if a * a >= 1.0:
        raise DegenerateSelectionError(a * a)
    fig3_model(c0, beta1, beta2)
    return -beta2 * (1.0 - c0 * c0) * a / (1.0 - a * a)


def selection_report(c0: float, beta1: float, beta2: float) -> BiasReport:
    # An instrument leaves pure selection bias untouched: a3 equals a2.
    b0 = selection_bias(c0, beta1, beta2)
    return BiasReport(
        a1=c0,
        a2=c0 + b0,
        a3=c0 + b0,
        b0=b0,
        bz=b0,
        amplification=bias_ratio(b0, b0),
        classification=classify(b0, b0),
        details={"model": "selection", "beta1": beta1, "beta2": beta2},
    )


# --- Arbitrary linear models ---

def analyze_linear(
    model: LinearSCM,
    treatment: str,
    outcome: str,
    conditioning: Iterable[str] = (),
    selection: Iterable[str] = (),
) -> BiasReport:
    """
    Bias report for any linear model: a2 conditions on the selection set only,
    a3 on the selection set plus the extra conditioning variables.
    """
    conditioning = tuple(conditioning)
    selection = tuple(selection)
    a1 = total_effect(model, treatment, outcome)
    a2 = partial_regression_slope(model, outcome, treatment, selection)
    a3 = partial_regression_slope(model, outcome, treatment, selection + conditioning) if conditioning else a2
    b0, bz = a2 - a1, a3 - a1
    logger.info(f"Analyzed {treatment} -> {outcome} given {list(conditioning)} (selection {list(selection)}): b0={b0:.6g}, bz={bz:.6g}")
    return BiasReport(
        a1=a1,
        a2=a2,
        a3=a3,
        b0=b0,
        bz=bz,
        amplification=bias_ratio(b0, bz),
        classification=classify(b0, bz),
        details={
            "treatment": treatment,
            "outcome": outcome,
            "conditioning": list(conditioning),
            "selection": list(selection),
            "signed_reducer": bz <= b0,
        },
    )
