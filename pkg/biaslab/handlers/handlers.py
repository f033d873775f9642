# biaslab/handlers/handlers.py
# This module contains the main CommandHandlers class: it builds the
# command-line parser, validates flags per verb and delegates each verb
# to its handler. The reproduce suite lives in ReproduceHandler.

import argparse
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

from config import config
from biaslab.analytic import (
    NonlinearOutcomeModel,
    analyze_linear,
    build_nonlinear_model,
    nonlinear_bias_pair,
)
from biaslab.dataset import Dataset
from biaslab.diagnostics import covariate_screen, run_iv_sensitivity_test
from biaslab.errors import UsageError
from biaslab.formatter import FORMATS, Output, ReportFormatter
from biaslab.graph_analysis import (
    SeparationQuery,
    bias_taxonomy,
    d_separated,
    iv_effect_prediction,
    open_paths,
    render_path,
)
from biaslab.modelspec import load_model_spec
from biaslab.montecarlo import DISTURBANCES, SimConfig, run_bias_experiment, sample, select_band
from biaslab.scm import LinearSCM, build_model
from biaslab.utils import QueryParser, parse_names, parse_point
from .reproduce_handler import ReproduceHandler

logger = logging.getLogger(__name__)

Model = Union[LinearSCM, NonlinearOutcomeModel]


class Verb(str, Enum):
    ANALYZE = "analyze"
    SIMULATE = "simulate"
    DSEP = "dsep"
    TAXONOMY = "taxonomy"
    CLASSIFY = "classify"
    DIAGNOSE = "diagnose"
    REPRODUCE = "reproduce"


@dataclass(frozen=True)
class Command:
    verb: Verb
    options: argparse.Namespace


class UsageArgumentParser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; usage errors must exit with 1.
    def error(self, message: str):
        raise UsageError(message)


def load_model(path: str) -> Model:
    spec = load_model_spec(path)
    if spec.outcome is not None:
        return build_nonlinear_model(spec)
    return build_model(spec)


class CommandHandlers:
    def __init__(self):
        self.parser = self.build_parser()
        self.formatter = ReportFormatter()

    # --- Parser ---

    @staticmethod
    def build_parser() -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--format", choices=FORMATS, default="table", help="output format (default: table)")
        common.add_argument("--out", help="write the artifact to this file instead of standard output")
        common.add_argument("--seed", type=int, help="master seed (default: BIASLAB_SEED or 0)")

        roles = argparse.ArgumentParser(add_help=False)
        roles.add_argument("--x", default="X", help="treatment variable (default: X)")
        roles.add_argument("--y", default="Y", help="outcome variable (default: Y)")

        sim = argparse.ArgumentParser(add_help=False)
        sim.add_argument("--n", type=int, default=100_000, help="sample size per replication")
        sim.add_argument("--reps", type=int, default=1, help="number of replications")
        sim.add_argument("--select", help="selection node S; rows are kept in a band around S = 0")
        sim.add_argument("--band", type=float, default=config.SELECTION_BAND, help="selection band half-width h")
        sim.add_argument("--disturbance", choices=DISTURBANCES, default="gaussian")

        parser = UsageArgumentParser(prog="biaslab", description="Bias amplification and selection-bias lab.")
        verbs = parser.add_subparsers(dest="verb", required=True, parser_class=UsageArgumentParser)

        analyze = verbs.add_parser(Verb.ANALYZE.value, parents=[common, roles], help="closed-form bias report")
        analyze.add_argument("--model", required=True)
        analyze.add_argument("--condition", help="extra conditioning variables, comma-separated")
        analyze.add_argument("--select", help="selection nodes, comma-separated")
        analyze.add_argument("--at", help="evaluation point x,z for nonlinear models")

        simulate = verbs.add_parser(Verb.SIMULATE.value, parents=[common, roles, sim], help="Monte Carlo check")
        simulate.add_argument("--model", required=True)
        simulate.add_argument("--condition", help="conditioning variables, comma-separated")
        simulate.add_argument("--at", action="append", help="evaluation point x,z for nonlinear models (repeatable)")
        simulate.add_argument("--emit-data", dest="emit_data", help="write the replication-0 dataset to this CSV file")

        dsep = verbs.add_parser(Verb.DSEP.value, parents=[common], help="d-separation query 'A _||_ B | C,D'")
        dsep.add_argument("query")
        dsep.add_argument("--model", required=True)

        taxonomy = verbs.add_parser(Verb.TAXONOMY.value, parents=[common], help="path taxonomy 'X -> Y | S1'")
        taxonomy.add_argument("query")
        taxonomy.add_argument("--model", required=True)
        taxonomy.add_argument("--z", help="instrument whose effect on the association is predicted")

        classify = verbs.add_parser(Verb.CLASSIFY.value, parents=[common, roles], help="amplifier / reducer verdict")
        classify.add_argument("--model", required=True)
        classify.add_argument("--z", default="Z", help="covariate to classify (default: Z)")
        classify.add_argument("--select", help="selection nodes, comma-separated")
        classify.add_argument("--at", help="evaluation point x,z for nonlinear models")

        diagnose = verbs.add_parser(Verb.DIAGNOSE.value, parents=[common, roles, sim], help="IV-sensitivity diagnostics")
        source = diagnose.add_mutually_exclusive_group(required=True)
        source.add_argument("--data", help="CSV dataset")
        source.add_argument("--model", help="model file to simulate the data from")
        diagnose.add_argument("--z", default="Z", help="believed instrument (default: Z)")
        diagnose.add_argument("--condition", help="extra conditioning variables, comma-separated")
        diagnose.add_argument("--candidates", help="covariates to screen, comma-separated")
        diagnose.add_argument("--k", type=float, help="verdict threshold in standard errors")
        diagnose.add_argument("--resamples", type=int, help="bootstrap resamples")

        reproduce = verbs.add_parser(Verb.REPRODUCE.value, parents=[common], help="regenerate the reference tables")
        reproduce.add_argument("--n", type=int, default=200_000, help="sample size per replication")
        reproduce.add_argument("--reps", type=int, default=5, help="replications per experiment")
        return parser

    def parse(self, argv: Optional[Sequence[str]]) -> Command:
        options = self.parser.parse_args(argv)
        if options.seed is None:
            options.seed = config.SEED
        return Command(Verb(options.verb), options)

    @staticmethod
    def _sim_config(options: argparse.Namespace) -> SimConfig:
        return SimConfig(
            n=options.n,
            seed=options.seed,
            replications=options.reps,
            selection_band=getattr(options, "band", config.SELECTION_BAND),
            disturbance=getattr(options, "disturbance", "gaussian"),
        )

    # --- Dispatch ---

    async def dispatch(self, command: Command) -> Output:
        handler = {
            Verb.ANALYZE: self.handle_analyze,
            Verb.SIMULATE: self.handle_simulate,
            Verb.DSEP: self.handle_dsep,
            Verb.TAXONOMY: self.handle_taxonomy,
            Verb.CLASSIFY: self.handle_classify,
            Verb.DIAGNOSE: self.handle_diagnose,
            Verb.REPRODUCE: self.handle_reproduce,
        }[command.verb]
        logger.info(f"Running {command.verb.value}.")
        return await handler(command.options)

    def emit(self, output: Output, options: argparse.Namespace) -> None:
        text = self.formatter.render(output, options.format)
        if options.out:
            Path(options.out).write_text(text, encoding="utf-8")
            logger.info(f"Wrote {options.format} artifact to {options.out}.")
        else:
            print(text, end="")

    # --- Verbs ---

    @staticmethod
    def _nonlinear_report(model: NonlinearOutcomeModel, options: argparse.Namespace, conditioning):
        if not options.at:
            raise UsageError("nonlinear models need an evaluation point: --at x,z")
        if options.select:
            raise UsageError("--select is not available for nonlinear models")
        if conditioning not in ((), (model.instrument,)):
            raise UsageError(f"nonlinear models condition only on their instrument '{model.instrument}'")
        x, z = parse_point(options.at)
        return nonlinear_bias_pair(model, x, z)

    async def handle_analyze(self, options: argparse.Namespace) -> Output:
        model = load_model(options.model)
        conditioning = parse_names(options.condition)
        if isinstance(model, NonlinearOutcomeModel):
            report = self._nonlinear_report(model, options, conditioning)
        else:
            report = analyze_linear(model, options.x, options.y, conditioning, parse_names(options.select))
        return Output(
            payload=report.to_dict(),
            sections={"bias report": [report.to_dict()], "details": [dict(report.details)]},
        )

    async def handle_classify(self, options: argparse.Namespace) -> Output:
        model = load_model(options.model)
        if isinstance(model, NonlinearOutcomeModel):
            report = self._nonlinear_report(model, options, (options.z,))
        else:
            report = analyze_linear(model, options.x, options.y, (options.z,), parse_names(options.select))
        verdict = {
            "covariate": options.z,
            "classification": report.classification.value,
            "b0": report.b0,
            "bz": report.bz,
            "amplification": report.amplification,
            "signed_reducer": report.details.get("signed_reducer"),
        }
        return Output(payload=verdict, sections={"classification": [verdict]})

    async def handle_simulate(self, options: argparse.Namespace) -> Output:
        model = load_model(options.model)
        sim = self._sim_config(options)
        conditioning = parse_names(options.condition)
        sets = [(), conditioning] if conditioning else [()]
        points = [parse_point(p) for p in options.at or []]

        if isinstance(model, NonlinearOutcomeModel):
            if options.select:
                raise UsageError("--select is not available for nonlinear models")
            report = await run_bias_experiment(model, sets, sim, points=points)
        else:
            report = await run_bias_experiment(model, sets, sim, options.x, options.y, options.select)

        if options.emit_data:
            data = sample(model, sim, 0)
            if options.select:
                data = select_band(data, options.select, 0.0, sim.selection_band)
            data.to_csv(options.emit_data)

        payload = {"settings": report.settings(), "passed": report.passed, "rows": report.to_records()}
        return Output(payload=payload, sections={"experiment": report.to_records()})

    async def handle_dsep(self, options: argparse.Namespace) -> Output:
        model = load_model(options.model)
        graph = self._graph_of(model)
        a, b, given = QueryParser.parse_separation(options.query)
        query = SeparationQuery(a, b, frozenset(given))
        separated = d_separated(graph, query)
        paths, truncated = open_paths(graph, a, b, given, limit=config.PATH_LIMIT)
        result = {
            "query": str(query),
            "d_separated": separated,
            "open_paths": [render_path(graph, p) for p in paths],
            "truncated": truncated,
        }
        return Output(payload=result, sections={"d-separation": [{"query": str(query), "d_separated": separated}]})

    async def handle_taxonomy(self, options: argparse.Namespace) -> Output:
        model = load_model(options.model)
        graph = self._graph_of(model)
        treatment, outcome, conditioned = QueryParser.parse_effect(options.query)
        report = bias_taxonomy(graph, treatment, outcome, conditioned)
        payload = report.to_dict()
        summary = {k: v for k, v in payload.items() if k != "paths"}
        if options.z:
            effect = iv_effect_prediction(graph, treatment, outcome, options.z, conditioned)
            payload["iv_effect"] = summary["iv_effect"] = effect.value
        return Output(payload=payload, sections={"taxonomy": [summary], "open paths": [p.to_dict() for p in report.paths]})

    async def handle_diagnose(self, options: argparse.Namespace) -> Output:
        if options.data:
            data = Dataset.read_csv(options.data)
        else:
            model = load_model(options.model)
            sim = self._sim_config(options)
            data = sample(model, sim, 0)
            if options.select:
                data = select_band(data, options.select, 0.0, sim.selection_band)

        verdict = await run_iv_sensitivity_test(
            data, options.x, options.y, options.z, parse_names(options.condition),
            k=options.k, resamples=options.resamples, seed=options.seed,
        )
        payload = {"sensitivity": verdict.to_dict()}
        summary = {k: v for k, v in verdict.to_dict().items() if k != "caveats"}
        sections = {"iv sensitivity": [summary], "caveats": [{"caveat": c} for c in verdict.caveats]}

        candidates = parse_names(options.candidates)
        if candidates:
            advice = [a.to_dict() for a in covariate_screen(data, options.x, options.y, candidates)]
            payload["covariates"] = advice
            sections["covariate screen"] = advice
        return Output(payload=payload, sections=sections)

    async def handle_reproduce(self, options: argparse.Namespace) -> Output:
        sim = SimConfig(n=options.n, seed=options.seed, replications=options.reps)
        return await ReproduceHandler(sim).handle_reproduce()

    @staticmethod
    def _graph_of(model: Model):
        if isinstance(model, NonlinearOutcomeModel):
            raise UsageError("graph queries need a linear model file")
        return model.graph
