# biaslab/montecarlo.py
# Seeded Monte Carlo oracle: sampling from linear and nonlinear models,
# least-squares fits, band selection, local bins and the replicated
# bias experiment that checks the closed forms in biaslab.analytic.

import asyncio
import logging
import math
from dataclasses import dataclass, field
from functools import singledispatch
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np
import statsmodels.api as sm

from config import config
from biaslab.analytic import NonlinearOutcomeModel, nonlinear_slopes
from biaslab.dataset import Dataset
from biaslab.errors import (
    EmptySelectionError,
    InfeasibleModelError,
    InsufficientDataError,
    InvalidQueryError,
    InvariantViolationError,
    SingularDesignError,
)
from biaslab.scm import LinearSCM, partial_regression_slope

logger = logging.getLogger(__name__)

T = TypeVar("T")

DISTURBANCES = ("gaussian", "uniform")


@dataclass(frozen=True)
class SimConfig:
    n: int = 100_000
    seed: int = field(default_factory=lambda: config.SEED)
    replications: int = 1
    selection_band: float = field(default_factory=lambda: config.SELECTION_BAND)
    disturbance: str = "gaussian"
    bin_half_width: float = field(default_factory=lambda: config.BIN_HALF_WIDTH)
    tolerance_se: float = field(default_factory=lambda: config.TOLERANCE_SE)
    tolerance_abs: float = field(default_factory=lambda: config.TOLERANCE_ABS)

    def __post_init__(self):
        if self.n < 2:
            raise InvalidQueryError(f"sample size must be >= 2, got {self.n}")
        if self.replications < 1:
            raise InvalidQueryError(f"replications must be >= 1, got {self.replications}")
        if self.seed < 0:
            raise InvalidQueryError(f"seed must be a non-negative integer, got {self.seed}")
        if not self.selection_band > 0:
            raise InvalidQueryError(f"selection band must be > 0, got {self.selection_band}")
        if not self.bin_half_width > 0:
            raise InvalidQueryError(f"bin half-width must be > 0, got {self.bin_half_width}")
        if self.disturbance not in DISTURBANCES:
            raise InvalidQueryError(f"unknown disturbance '{self.disturbance}' (expected one of {', '.join(DISTURBANCES)})")

    def tolerance(self, se: float) -> float:
        return max(self.tolerance_se * se, self.tolerance_abs)


@dataclass(frozen=True)
class RegressionResult:
    coefficients: Mapping[str, float]
    standard_errors: Mapping[str, float]
    n_used: int
    intercept: float = 0.0

    def __post_init__(self):
        if self.n_used < len(self.coefficients) + 1:
            raise InvariantViolationError(f"regression used {self.n_used} rows for {len(self.coefficients)} regressors")
        if any(not se >= 0 for se in self.standard_errors.values()):
            raise InvariantViolationError(f"negative or undefined standard error: {dict(self.standard_errors)}")

    def coefficient(self, name: str) -> float:
        return self.coefficients[name]

    def se(self, name: str) -> float:
        return self.standard_errors[name]


# --- Random streams ---

def replication_rng(seed: int, replication: int) -> np.random.Generator:
    # Counter-based stream keyed by (seed, replication): independent of run order.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replication,))))


def _disturbance(rng: np.random.Generator, n: int, variance: float, kind: str) -> np.ndarray:
    scale = math.sqrt(variance)
    if kind == "uniform":
        # Centered uniform with the requested variance.
        return (rng.random(n) - 0.5) * math.sqrt(12.0) * scale
    return rng.standard_normal(n) * scale


# --- Sampling ---

@singledispatch
def sample(model: Any, sim: SimConfig, replication: int = 0) -> Dataset:
    raise InfeasibleModelError(f"cannot sample from a {type(model).__name__}")


@sample.register
def _sample_linear(model: LinearSCM, sim: SimConfig, replication: int = 0) -> Dataset:
    graph = model.graph
    rng = replication_rng(sim.seed, replication)
    # Disturbances are drawn in declaration order so the stream layout is fixed.
    noise = {name: _disturbance(rng, sim.n, model.noise_variances[name], sim.disturbance) for name in graph.nodes}

    values: Dict[str, np.ndarray] = {}
    for node in graph.topological_order:
        column = noise[node]
        for parent in graph.parents(node):
            column = column + model.coefficient(parent, node) * values[parent]
        values[node] = column
    return Dataset({name: values[name] for name in graph.nodes})


@sample.register
def _sample_nonlinear(model: NonlinearOutcomeModel, sim: SimConfig, replication: int = 0) -> Dataset:
    if sim.disturbance != "gaussian":
        raise InfeasibleModelError("nonlinear outcome models are sampled with gaussian disturbances only")
    rng = replication_rng(sim.seed, replication)
    z = _disturbance(rng, sim.n, 1.0, sim.disturbance)
    u = _disturbance(rng, sim.n, 1.0, sim.disturbance)
    x = model.c3 * z + model.c1 * u + _disturbance(rng, sim.n, model.var_eps_x, sim.disturbance)
    y = model.f(x) + u * model.g(x, strict=False) + _disturbance(rng, sim.n, model.var_eps_y, sim.disturbance)
    return Dataset({model.instrument: z, model.confounder: u, model.treatment: x, model.outcome: y})


# --- Estimation ---

def ols(data: Dataset, response: str, regressors: Sequence[str]) -> RegressionResult:
    """
    Least squares of `response` on `regressors` plus an intercept,
    with classical (homoskedastic) standard errors.
    """
    regressors = list(dict.fromkeys(regressors))
    if not regressors:
        raise InvalidQueryError("at least one regressor is required")
    data.require(response, *regressors)
    if response in regressors:
        raise InvalidQueryError(f"'{response}' cannot be both response and regressor")
    if data.n <= len(regressors) + 1:
        raise SingularDesignError(f"{data.n} rows cannot identify {len(regressors)} slopes and an intercept")

    design = sm.add_constant(data.matrix(regressors), has_constant="add")
    cond = np.linalg.cond(design)
    if not np.isfinite(cond) or cond > config.CONDITION_LIMIT:
        raise SingularDesignError(f"design matrix is singular or ill-conditioned (condition number {cond:.3g})")

    fit = sm.OLS(data[response], design).fit()
    params = np.asarray(fit.params)
    bse = np.asarray(fit.bse)
    return RegressionResult(
        coefficients={name: float(params[i + 1]) for i, name in enumerate(regressors)},
        standard_errors={name: float(bse[i + 1]) for i, name in enumerate(regressors)},
        n_used=data.n,
        intercept=float(params[0]),
    )


def select_band(data: Dataset, s: str, center: float, half_width: float) -> Dataset:
    data.require(s)
    if not half_width > 0:
        raise InvalidQueryError(f"band half-width must be > 0, got {half_width}")
    if math.isinf(half_width):
        return data
    mask = np.abs(data[s] - center) <= half_width
    kept = int(mask.sum())
    if kept == 0:
        raise EmptySelectionError(f"no rows with |{s} - {center:g}| <= {half_width:g}; widen the band or raise n")
    logger.info(f"Band {s} in [{center - half_width:g}, {center + half_width:g}] kept {kept} of {data.n} rows.")
    return data.filter(mask)


def _box(data: Dataset, center: Mapping[str, float], half_widths: Union[float, Mapping[str, float]]) -> Dataset:
    data.require(*center)
    mask = np.ones(data.n, dtype=bool)
    for name, value in center.items():
        h = half_widths if isinstance(half_widths, (int, float)) else half_widths[name]
        mask &= np.abs(data[name] - value) <= h
    if not mask.any():
        raise EmptySelectionError(f"no rows inside the box around {dict(center)}")
    return data.filter(mask)


def local_slope(
    data: Dataset,
    response: str,
    regressor: str,
    center: Mapping[str, float],
    half_widths: Union[float, Mapping[str, float]],
) -> RegressionResult:
    """
    Local linear fit inside a box around `center`. Every variable in the box
    enters the regression, so the slope on `regressor` estimates the partial
    derivative of E(response | box variables) at the center.
    """
    if regressor not in center:
        raise InvalidQueryError(f"the box must be centered on the regressor '{regressor}'")
    local = _box(data, center, half_widths)
    regressors = [regressor] + [name for name in center if name != regressor]
    return ols(local, response, regressors)


def binned_mean(
    data: Dataset, response: str, center: Mapping[str, float], half_widths: Union[float, Mapping[str, float]]
) -> Tuple[float, float]:
    local = _box(data, center, half_widths)
    values = local[response]
    if values.size < 2:
        raise InsufficientDataError(f"only {values.size} row in the bin around {dict(center)}")
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


# --- Concurrency ---

async def run_bounded(jobs: Sequence[Callable[[], T]]) -> List[T]:
    # Results come back in job order regardless of completion order.
    semaphore = asyncio.Semaphore(max(config.WORKERS, 1))

    async def _run(job: Callable[[], T]) -> T:
        async with semaphore:
            return await asyncio.to_thread(job)

    return list(await asyncio.gather(*(_run(job) for job in jobs)))


# --- Bias experiment ---

@dataclass(frozen=True)
class ExperimentRow:
    label: str
    conditioning: Tuple[str, ...]
    point: Optional[Tuple[float, float]]
    estimate: float
    se: float
    analytic: float
    z_score: float
    tolerance: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "conditioning": ",".join(self.conditioning),
            "point": "" if self.point is None else f"{self.point[0]:g},{self.point[1]:g}",
            "estimate": self.estimate,
            "se": self.se,
            "analytic": self.analytic,
            "z_score": self.z_score,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class ExperimentReport:
    rows: Tuple[ExperimentRow, ...]
    n: int
    replications: int
    seed: int
    disturbance: str
    selection: Optional[str] = None
    band: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def row(self, label: str) -> ExperimentRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)

    def to_records(self) -> List[Dict[str, Any]]:
        return [row.to_dict() for row in self.rows]

    def settings(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "replications": self.replications,
            "seed": self.seed,
            "disturbance": self.disturbance,
            "selection": self.selection,
            "band": self.band,
        }


def _row_label(treatment: str, conditioning: Tuple[str, ...], point=None) -> str:
    given = f" | {','.join(conditioning)}" if conditioning else ""
    at = f" @ ({point[0]:g},{point[1]:g})" if point is not None else ""
    return f"slope {treatment}{given}{at}"


def _summarize(
    sim: SimConfig, label: str, conditioning: Tuple[str, ...], point, analytic: float, fits: List[Tuple[float, float]]
) -> ExperimentRow:
    estimates = np.array([estimate for estimate, _ in fits])
    ses = np.array([se for _, se in fits])
    mean = float(estimates.mean())
    se = float(math.sqrt(float(np.sum(ses ** 2))) / len(fits))
    tolerance = sim.tolerance(se)
    z_score = (mean - analytic) / se if se > 0 else 0.0
    passed = abs(mean - analytic) <= tolerance
    if not passed:
        logger.warning(f"{label}: estimate {mean:.6g} misses analytic {analytic:.6g} by more than {tolerance:.3g}")
    return ExperimentRow(label, conditioning, point, mean, se, float(analytic), float(z_score), tolerance, passed)


def _check_conditioning(names: Sequence[str], treatment: str, outcome: str, conditioning_sets) -> List[Tuple[str, ...]]:
    checked = []
    for cset in conditioning_sets:
        cset = tuple(dict.fromkeys(cset))
        for name in cset:
            if name not in names:
                raise InvalidQueryError(f"unknown conditioning variable '{name}'")
            if name in (treatment, outcome):
                raise InvalidQueryError("conditioning sets must exclude the treatment and the outcome")
        checked.append(cset)
    return checked


async def _linear_experiment(
    model: LinearSCM,
    conditioning_sets: List[Tuple[str, ...]],
    sim: SimConfig,
    treatment: str,
    outcome: str,
    selection: Optional[str],
) -> List[ExperimentRow]:
    selected = (selection,) if selection else ()
    analytic = [partial_regression_slope(model, outcome, treatment, selected + cset) for cset in conditioning_sets]

    def replicate(rep: int) -> List[Tuple[float, float]]:
        data = sample(model, sim, rep)
        if selection:
            data = select_band(data, selection, 0.0, sim.selection_band)
        fits = []
        for cset in conditioning_sets:
            result = ols(data, outcome, [treatment, *cset])
            fits.append((result.coefficient(treatment), result.se(treatment)))
        return fits

    per_rep = await run_bounded([lambda rep=rep: replicate(rep) for rep in range(sim.replications)])
    return [
        _summarize(sim, _row_label(treatment, cset), cset, None, analytic[i], [fits[i] for fits in per_rep])
        for i, cset in enumerate(conditioning_sets)
    ]


async def _nonlinear_experiment(
    model: NonlinearOutcomeModel,
    conditioning_sets: List[Tuple[str, ...]],
    sim: SimConfig,
    points: Sequence[Tuple[float, float]],
) -> List[ExperimentRow]:
    for cset in conditioning_sets:
        if cset not in ((), (model.instrument,)):
            raise InvalidQueryError(
                f"nonlinear experiments condition on nothing or on the instrument '{model.instrument}', got {list(cset)}"
            )
    if not points:
        raise InvalidQueryError("nonlinear experiments need at least one evaluation point (x, z)")

    # One row per (point, conditioning set); the slope without Z is a2, with Z a3.
    cells = []
    for x, z in points:
        a1, a2, a3 = nonlinear_slopes(model, x, z)
        for cset in conditioning_sets:
            center = {model.treatment: x}
            if cset:
                center[model.instrument] = z
            cells.append(((x, z), cset, center, a3 if cset else a2))

    def replicate(rep: int) -> List[Tuple[float, float]]:
        data = sample(model, sim, rep)
        fits = []
        for _, _, center, _ in cells:
            result = local_slope(data, model.outcome, model.treatment, center, sim.bin_half_width)
            fits.append((result.coefficient(model.treatment), result.se(model.treatment)))
        return fits

    per_rep = await run_bounded([lambda rep=rep: replicate(rep) for rep in range(sim.replications)])
    return [
        _summarize(sim, _row_label(model.treatment, cset, point), cset, point, analytic, [fits[i] for fits in per_rep])
        for i, (point, cset, _, analytic) in enumerate(cells)
    ]


async def run_bias_experiment(
    model: Union[LinearSCM, NonlinearOutcomeModel],
    conditioning_sets: Sequence[Sequence[str]],
    sim: SimConfig,
    treatment: str = "X",
    outcome: str = "Y",
    selection: Optional[str] = None,
    points: Sequence[Tuple[float, float]] = (),
) -> ExperimentReport:
    """
    Replicates sample -> (band) -> regress for every conditioning set and
    compares the mean slope with its closed-form counterpart.

    Linear models: the analytic value is the population slope of outcome on
    treatment given the conditioning set (plus the selection node, if any).
    Nonlinear models: local slopes in boxes around each (x, z) point,
    against a2 (no conditioning) or a3 (conditioning on the instrument).
    """
    logger.info(
        f"Starting bias experiment: {len(conditioning_sets)} conditioning sets, n={sim.n}, "
        f"replications={sim.replications}, seed={sim.seed}."
    )
    if isinstance(model, NonlinearOutcomeModel):
        sets = _check_conditioning(model.columns, model.treatment, model.outcome, conditioning_sets)
        rows = await _nonlinear_experiment(model, sets, sim, points)
        selection = None
    else:
        model.graph.require(treatment, outcome, *([selection] if selection else []))
        sets = _check_conditioning(model.graph.nodes, treatment, outcome, conditioning_sets)
        if selection and any(selection in cset for cset in sets):
            raise InvalidQueryError(f"the selection node '{selection}' cannot also be a conditioning variable")
        rows = await _linear_experiment(model, sets, sim, treatment, outcome, selection)

    return ExperimentReport(
        rows=tuple(rows),
        n=sim.n,
        replications=sim.replications,
        seed=sim.seed,
        disturbance=sim.disturbance,
        selection=selection,
        band=sim.selection_band if selection else None,
    )


def bias_experiment(
    model: Union[LinearSCM, NonlinearOutcomeModel],
    conditioning_sets: Sequence[Sequence[str]],
    sim: SimConfig,
    treatment: str = "X",
    outcome: str = "Y",
    selection: Optional[str] = None,
    points: Sequence[Tuple[float, float]] = (),
) -> ExperimentReport:
    return asyncio.run(run_bias_experiment(model, conditioning_sets, sim, treatment, outcome, selection, points))
