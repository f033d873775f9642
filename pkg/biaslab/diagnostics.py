# biaslab/diagnostics.py
# Data-facing checks: does the treatment slope move when a believed
# instrument is added (a symptom of confounding), and which covariates look
# like bias amplifiers rather than outcome predictors.

import asyncio
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from config import config
from biaslab.dataset import Dataset
from biaslab.errors import InsufficientDataError, InvalidQueryError, SingularDesignError
from biaslab.montecarlo import ols, replication_rng, run_bounded
from biaslab.scm import CovarianceMatrix, partial_correlation

logger = logging.getLogger(__name__)

_CHUNK = 100  # bootstrap resamples per task

CAVEATS = (
    "In nonlinear systems the instrument can introduce bias of its own, so a slope change need not come from confounding.",
    "Confounding paths can cancel by fine-tuning, leaving the slope unchanged even though bias is present.",
    "The instrument is taken on trust: the data are not used to verify that it affects the outcome only through the treatment.",
    "No change in slope does not rule out selection bias, which conditioning on an instrument leaves untouched.",
)


class Verdict(str, Enum):
    CONFOUNDING_SUSPECTED = "ConfoundingSuspected"
    NO_EVIDENCE = "NoEvidenceOfConfounding"


class Advice(str, Enum):
    RETAIN = "Retain"
    DISCARD = "Discard"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class ZYDependence:
    partial_correlation: float
    t_statistic: float
    n: int

    def to_dict(self) -> Dict[str, Any]:
        return {"partial_correlation": self.partial_correlation, "t_statistic": self.t_statistic, "n": self.n}


@dataclass(frozen=True)
class SensitivityVerdict:
    slope_without_iv: float
    slope_with_iv: float
    delta: float
    delta_se: float
    verdict: Verdict
    caveats: Tuple[str, ...]
    p_value: float
    n: int
    k: float
    resamples: int
    seed: int
    zy_dependence: ZYDependence

    def to_dict(self) -> Dict[str, Any]:
        return {
            "slope_without_iv": self.slope_without_iv,
            "slope_with_iv": self.slope_with_iv,
            "delta": self.delta,
            "delta_se": self.delta_se,
            "verdict": self.verdict.value,
            "p_value": self.p_value,
            "n": self.n,
            "k": self.k,
            "resamples": self.resamples,
            "seed": self.seed,
            "zy_partial_correlation": self.zy_dependence.partial_correlation,
            "zy_t_statistic": self.zy_dependence.t_statistic,
            "caveats": list(self.caveats),
        }


@dataclass(frozen=True)
class CovariateAdvice:
    covariate: str
    treatment_association: float
    treatment_t: float
    outcome_association: float
    outcome_t: float
    advice: Advice

    def to_dict(self) -> Dict[str, Any]:
        return {
            "covariate": self.covariate,
            "treatment_association": self.treatment_association,
            "treatment_t": self.treatment_t,
            "outcome_association": self.outcome_association,
            "outcome_t": self.outcome_t,
            "advice": self.advice.value,
        }


# --- Helpers ---

def _slope(y: np.ndarray, design: np.ndarray) -> float:
    # First non-intercept coefficient of a least-squares fit.
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(coef[1])


def _design(data: Dataset, names: Sequence[str]) -> np.ndarray:
    return np.column_stack([np.ones(data.n), data.matrix(names)])


def _check_distinct(*groups: Iterable[str]) -> None:
    names = [n for group in groups for n in group]
    if len(names) != len(set(names)):
        raise InvalidQueryError(f"variables must be distinct, got {names}")


# --- Y-Z dependence given X ---

def zy_dependence(data: Dataset, x: str, y: str, z: str) -> ZYDependence:
    """Partial correlation of outcome and instrument given the treatment."""
    data.require(x, y, z)
    _check_distinct([x, y, z])
    if data.n < 4:
        raise InsufficientDataError(f"need at least 4 rows, got {data.n}")
    cov = CovarianceMatrix((x, y, z), np.cov(data.matrix([x, y, z]), rowvar=False))
    r = partial_correlation(cov, y, z, (x,))
    t = r * math.sqrt((data.n - 3) / max(1.0 - r * r, 1e-300))
    return ZYDependence(partial_correlation=r, t_statistic=t, n=data.n)


# --- IV sensitivity ---

async def run_iv_sensitivity_test(
    data: Dataset,
    x: str,
    y: str,
    z: str,
    extra_conditioning: Sequence[str] = (),
    k: Optional[float] = None,
    resamples: Optional[int] = None,
    seed: Optional[int] = None,
) -> SensitivityVerdict:
    extra = list(dict.fromkeys(extra_conditioning))
    data.require(x, y, z, *extra)
    _check_distinct([x, y, z], extra)
    k = config.SENSITIVITY_K if k is None else k
    resamples = config.BOOTSTRAP_RESAMPLES if resamples is None else resamples
    seed = config.SEED if seed is None else seed
    if data.n < config.MIN_DIAGNOSTIC_ROWS:
        raise InsufficientDataError(f"IV-sensitivity needs at least {config.MIN_DIAGNOSTIC_ROWS} rows, got {data.n}")
    if resamples < 2:
        raise InvalidQueryError(f"the bootstrap needs at least 2 resamples, got {resamples}")

    without = ols(data, y, [x, *extra]).coefficient(x)
    with_iv = ols(data, y, [x, z, *extra]).coefficient(x)
    delta = with_iv - without

    response = data[y]
    small = _design(data, [x, *extra])
    large = _design(data, [x, z, *extra])

    def chunk(index: int, size: int) -> List[float]:
        rng = replication_rng(seed, index)
        deltas = []
        for _ in range(size):
            rows = rng.integers(0, data.n, data.n)
            deltas.append(_slope(response[rows], large[rows]) - _slope(response[rows], small[rows]))
        return deltas

    sizes = [min(_CHUNK, resamples - start) for start in range(0, resamples, _CHUNK)]
    chunks = await run_bounded([lambda i=i, s=s: chunk(i, s) for i, s in enumerate(sizes)])
    deltas = np.array([d for part in chunks for d in part])
    delta_se = float(deltas.std(ddof=1))
    if not delta_se > 0:
        raise SingularDesignError("bootstrap slope differences have zero spread")

    verdict = Verdict.CONFOUNDING_SUSPECTED if abs(delta) > k * delta_se else Verdict.NO_EVIDENCE
    p_value = float(2.0 * stats.norm.sf(abs(delta) / delta_se))
    logger.info(f"IV-sensitivity {x}->{y} with {z}: delta={delta:.6g}, se={delta_se:.3g}, verdict={verdict.value}.")
    return SensitivityVerdict(
        slope_without_iv=without,
        slope_with_iv=with_iv,
        delta=delta,
        delta_se=delta_se,
        verdict=verdict,
        caveats=CAVEATS,
        p_value=p_value,
        n=data.n,
        k=k,
        resamples=resamples,
        seed=seed,
        zy_dependence=zy_dependence(data, x, y, z),
    )


def iv_sensitivity_test(
    data: Dataset,
    x: str,
    y: str,
    z: str,
    extra_conditioning: Sequence[str] = (),
    k: Optional[float] = None,
    resamples: Optional[int] = None,
    seed: Optional[int] = None,
) -> SensitivityVerdict:
    return asyncio.run(run_iv_sensitivity_test(data, x, y, z, extra_conditioning, k, resamples, seed))


# --- Covariate screen ---

def _standardize(data: Dataset, names: Sequence[str]) -> Dataset:
    columns = {}
    for name in names:
        values = data[name]
        sd = values.std()
        if not sd > 0:
            raise SingularDesignError(f"column '{name}' is constant")
        columns[name] = (values - values.mean()) / sd
    return Dataset(columns)


def covariate_screen(
    data: Dataset, x: str, y: str, candidates: Sequence[str], t_negligible: Optional[float] = None
) -> List[CovariateAdvice]:
    """
    Ranks candidates by what they do to the outcome rather than to the
    treatment. A candidate strongly tied to the treatment but negligible for
    the outcome (given the treatment and the other candidates) is flagged
    Discard: it behaves like an instrument and would amplify bias.
    """
    candidates = list(dict.fromkeys(candidates))
    if not candidates:
        raise InvalidQueryError("covariate_screen needs at least one candidate")
    data.require(x, y, *candidates)
    _check_distinct([x, y], candidates)
    t_neg = config.T_NEGLIGIBLE if t_negligible is None else t_negligible

    std = _standardize(data, [x, y, *candidates])
    outcome_fit = ols(std, y, [x, *candidates])

    advice = []
    for name in candidates:
        treatment_fit = ols(std, x, [name])
        t_treat = treatment_fit.coefficient(name) / treatment_fit.se(name)
        t_out = outcome_fit.coefficient(name) / outcome_fit.se(name)
        treat, out = treatment_fit.coefficient(name), outcome_fit.coefficient(name)

        if abs(t_out) >= t_neg:
            verdict = Advice.RETAIN
        elif abs(t_treat) >= t_neg and abs(out) <= abs(treat):
            verdict = Advice.DISCARD
        else:
            verdict = Advice.INDETERMINATE
        advice.append(CovariateAdvice(name, treat, t_treat, out, t_out, verdict))
        logger.info(f"Covariate {name}: treatment t={t_treat:.2f}, outcome t={t_out:.2f} -> {verdict.value}.")
    return advice
