# biaslab/handlers/reproduce_handler.py
# This module contains the ReproduceHandler class, which regenerates the
# reference tables: every row pairs a closed-form value with its Monte Carlo
# estimate, the standard error and a pass flag.

import logging
import math
import time
from dataclasses import replace
from typing import Any, Dict, List, Tuple

from biaslab.analytic import (
    NonlinearOutcomeModel,
    attenuation_factor,
    imperfect_instrument_report,
    linear_bias_pair,
    nonlinear_bias_pair,
    selection_bias,
    simpson_reversal,
)
from biaslab.corpus import fig1_model, fig2_model, fig3_model, unit_square_model
from biaslab.formatter import Output
from biaslab.montecarlo import ExperimentRow, SimConfig, run_bias_experiment
from biaslab.utils import format_duration

logger = logging.getLogger(__name__)

Records = List[Dict[str, Any]]

# --- Grids ---
IV_POINT = {"c0": 0.3, "c1": 0.5, "c2": 0.4}
C3_GRID = (0.0, 0.3, 0.6, 0.8)
C4_GRID = (0.0, 0.1, 0.15, 0.1875, 0.25, 0.3)
X_GRID = (0.75, 1.0, 1.5)
Z_GRID = (-1.0, 0.0, 1.0)
BETA_GRID = (-0.4, -0.2, 0.0, 0.2, 0.4)
SELECTION_C0 = 0.5
INVARIANCE_POINTS = ((0.5, 0.3, 0.4), (0.5, -0.4, 0.4), (0.3, 0.2, -0.4))
SIMPSON_POINT = (0.3, 0.5, -0.5, 0.6)
NONLINEAR_SCALE = 10  # nonlinear bins see a small share of the rows
NONLINEAR_TOLERANCE = 0.05


class ReproduceHandler:
    def __init__(self, sim: SimConfig):
        self.sim = sim

    @staticmethod
    def _difference(estimate: float, se: float, analytic: float, sim: SimConfig) -> Tuple[float, float, bool]:
        tolerance = sim.tolerance(se)
        return estimate, se, abs(estimate - analytic) <= tolerance

    async def _slopes(self, model, conditioning_sets, sim=None, **kwargs) -> Tuple[ExperimentRow, ...]:
        report = await run_bias_experiment(model, conditioning_sets, sim or self.sim, **kwargs)
        return report.rows

    # --- Tables ---

    async def amplification_table(self) -> Records:
        records = []
        for c3 in C3_GRID:
            pair = linear_bias_pair(c3=c3, **IV_POINT)
            plain, with_z = await self._slopes(fig1_model(c3=c3, **IV_POINT), [(), ("Z",)])
            b0 = plain.estimate - pair.a1
            bz = with_z.estimate - pair.a1
            ratio = bz / b0
            # Delta-method SE of bz/b0, treating the two slopes as independent.
            se = math.sqrt(with_z.se ** 2 + (ratio * plain.se) ** 2) / abs(b0)
            _, _, passed = self._difference(ratio, se, pair.amplification, self.sim)
            records.append(
                {"c3": c3, "b0": pair.b0, "bz": pair.bz, "analytic": pair.amplification,
                 "empirical": ratio, "se": se, "pass": passed}
            )
        return records

    async def reducer_table(self) -> Records:
        records = []
        for c4 in C4_GRID:
            report = imperfect_instrument_report(c3=0.6, c4=c4, **IV_POINT)
            plain, with_z = await self._slopes(fig2_model(c3=0.6, c4=c4, **IV_POINT), [(), ("Z",)])
            b0 = plain.estimate - report.a1
            bz = with_z.estimate - report.a1
            passed = abs(b0 - report.b0) <= plain.tolerance and abs(bz - report.bz) <= with_z.tolerance
            records.append(
                {"c4": c4, "bz": report.bz, "classification": report.classification.value,
                 "analytic": report.b0, "empirical": b0, "se": plain.se, "bz_empirical": bz, "pass": passed}
            )
        return records

    async def nonlinear_table(self) -> Records:
        model = NonlinearOutcomeModel.reciprocal()
        sim = replace(self.sim, n=self.sim.n * NONLINEAR_SCALE, tolerance_abs=max(self.sim.tolerance_abs, NONLINEAR_TOLERANCE))
        points = [(x, z) for x in X_GRID for z in Z_GRID]
        rows = await self._slopes(model, [(), (model.instrument,)], sim=sim, points=points)

        records = []
        for i, (x, z) in enumerate(points):
            plain, with_z = rows[2 * i], rows[2 * i + 1]
            report = nonlinear_bias_pair(model, x, z)
            records.append(
                {"x": x, "z": z, "b0": report.b0, "b0_empirical": plain.estimate - report.a1,
                 "analytic": report.bz, "empirical": with_z.estimate - report.a1, "se": with_z.se,
                 "pass": plain.passed and with_z.passed}
            )
        return records

    async def selection_table(self) -> Records:
        records = []
        for beta1 in BETA_GRID:
            for beta2 in BETA_GRID:
                feasible = beta1 ** 2 + beta2 ** 2 + 2 * beta1 * beta2 * SELECTION_C0 <= 1.0
                if not feasible:
                    continue
                analytic = selection_bias(SELECTION_C0, beta1, beta2)
                (row,) = await self._slopes(fig3_model(SELECTION_C0, beta1, beta2), [()], selection="S")
                estimate, se, passed = self._difference(row.estimate - SELECTION_C0, row.se, analytic, self.sim)
                records.append(
                    {"beta1": beta1, "beta2": beta2, "analytic": analytic, "empirical": estimate, "se": se, "pass": passed}
                )
        return records

    async def invariance_table(self) -> Records:
        records = []
        for c0, beta1, beta2 in INVARIANCE_POINTS:
            plain, with_z = await self._slopes(fig3_model(c0, beta1, beta2), [(), ("Z",)], selection="S")
            change = with_z.estimate - plain.estimate
            se = math.sqrt(plain.se ** 2 + with_z.se ** 2)
            _, _, passed = self._difference(change, se, 0.0, self.sim)
            records.append(
                {"c0": c0, "beta1": beta1, "beta2": beta2, "analytic": 0.0, "empirical": change, "se": se, "pass": passed}
            )
        return records

    async def simpson_table(self) -> Records:
        c0, c1, c2, c3 = SIMPSON_POINT
        pair = linear_bias_pair(c0, c1, c2, c3)
        reversal = simpson_reversal(c0, c1, c2, c3)
        plain, with_z = await self._slopes(fig1_model(c0, c1, c2, c3), [(), ("Z",)])
        records = []
        for name, analytic, row in (("a2", pair.a2, plain), ("a3", pair.a3, with_z)):
            records.append(
                {"slope": name, "analytic": analytic, "empirical": row.estimate, "se": row.se,
                 "reversal": reversal, "pass": row.passed and math.copysign(1, row.estimate) == math.copysign(1, analytic)}
            )
        return records

    async def attenuation_table(self) -> Records:
        sim = replace(self.sim, disturbance="uniform")
        records = []
        for c in (1.0, 0.5):
            analytic = attenuation_factor(1.0 / 12.0, c, 1.0 / 12.0)
            (row,) = await self._slopes(unit_square_model(c), [()], sim=sim, treatment="X", outcome="U")
            records.append({"c": c, "analytic": analytic, "empirical": row.estimate, "se": row.se, "pass": row.passed})
        return records

    # --- Entry point ---

    async def handle_reproduce(self) -> Output:
        started = time.monotonic()
        tables = {
            "amplification factor vs instrument strength": self.amplification_table,
            "reducer threshold sweep over direct effect c4": self.reducer_table,
            "nonlinear biases, reciprocal g": self.nonlinear_table,
            "selection bias surface": self.selection_table,
            "selection bias invariance to the instrument": self.invariance_table,
            "simpson reversal": self.simpson_table,
            "attenuation on the unit square": self.attenuation_table,
        }
        sections = {}
        for title, build in tables.items():
            logger.info(f"Reproducing: {title}")
            sections[title] = await build()

        failures = sum(1 for records in sections.values() for r in records if not r["pass"])
        if failures:
            logger.warning(f"{failures} reproduce rows fell outside tolerance.")
        logger.info(f"Reproduce finished in {format_duration(time.monotonic() - started)}.")

        payload = {
            "settings": {"n": self.sim.n, "replications": self.sim.replications, "seed": self.sim.seed},
            "passed": failures == 0,
            "tables": sections,
        }
        return Output(payload=payload, sections=sections)
