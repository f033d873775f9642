# biaslab/modelspec.py
# Parser for the line-oriented model-spec format:
#
#   [variables]          one "name kind" per line (observed | latent | selection)
#   [edges]              "parent -> child : coefficient"
#   [options]            "standardized = true|false", "noise_variance.NAME = v"
#   [outcome]            optional nonlinear outcome: treatment, node, f, g, noise_variance
#
# '#' starts a comment. Every parse error carries its line number.

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

from biaslab.errors import ModelSpecError
from biaslab.scm import Node, NodeKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EdgeSpec:
    parent: str
    child: str
    coefficient: float
    line: Optional[int] = None


@dataclass(frozen=True)
class OutcomeSpec:
    treatment: str
    node: str
    f: str
    g: str
    noise_variance: float = 1.0
    line: Optional[int] = None


@dataclass(frozen=True)
class ModelSpec:
    variables: Tuple[Node, ...]
    edges: Tuple[EdgeSpec, ...]
    standardized: bool = True
    noise_variances: Mapping[str, float] = field(default_factory=dict)
    outcome: Optional[OutcomeSpec] = None
    source: Optional[str] = None

    @classmethod
    def from_edges(
        cls,
        variables: Mapping[str, Union[str, NodeKind]],
        edges: Mapping[Tuple[str, str], float],
        standardized: bool = True,
        noise_variances: Optional[Mapping[str, float]] = None,
        source: Optional[str] = None,
    ) -> "ModelSpec":
        return cls(
            variables=tuple(Node(name, NodeKind(kind)) for name, kind in variables.items()),
            edges=tuple(EdgeSpec(p, c, float(v)) for (p, c), v in edges.items()),
            standardized=standardized,
            noise_variances=dict(noise_variances or {}),
            source=source,
        )


class ModelSpecParser:
    """Parser for the model-spec text format."""

    SECTIONS = ("variables", "edges", "options", "outcome")
    SECTION_PATTERN = re.compile(r"^\[(\w+)\]$")
    VARIABLE_PATTERN = re.compile(r"^([A-Za-z_]\w*)\s+(\w+)$")
    EDGE_PATTERN = re.compile(r"^([A-Za-z_]\w*)\s*->\s*([A-Za-z_]\w*)\s*:\s*(\S+)$")
    OPTION_PATTERN = re.compile(r"^([A-Za-z_][\w.]*)\s*=\s*(.+?)$")

    @staticmethod
    def _number(text: str, line: int, what: str) -> float:
        try:
            value = float(text)
        except ValueError:
            raise ModelSpecError(line, f"{what} '{text}' is not a number") from None
        if not math.isfinite(value):
            raise ModelSpecError(line, f"{what} must be finite, got '{text}'")
        return value

    @staticmethod
    def parse(text: str, source: Optional[str] = None) -> ModelSpec:
        variables: List[Node] = []
        declared: Dict[str, int] = {}
        edges: List[EdgeSpec] = []
        seen_edges: Dict[Tuple[str, str], int] = {}
        standardized = True
        noise: Dict[str, float] = {}
        noise_line: Optional[int] = None
        outcome_fields: Dict[str, Tuple[str, int]] = {}
        outcome_line: Optional[int] = None
        section: Optional[str] = None

        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue

            match = ModelSpecParser.SECTION_PATTERN.match(line)
            if match:
                section = match.group(1).lower()
                if section not in ModelSpecParser.SECTIONS:
                    raise ModelSpecError(number, f"unknown section [{section}]")
                if section == "outcome":
                    outcome_line = number
                continue

            if section is None:
                raise ModelSpecError(number, "content before the first [section] header")

            if section == "variables":
                match = ModelSpecParser.VARIABLE_PATTERN.match(line)
                if not match:
                    raise ModelSpecError(number, f"expected 'name kind', got '{line}'")
                name, kind = match.group(1), match.group(2).lower()
                if not name.isidentifier():
                    raise ModelSpecError(number, f"'{name}' is not a valid variable name")
                try:
                    node_kind = NodeKind(kind)
                except ValueError:
                    raise ModelSpecError(number, f"unknown variable kind '{kind}'") from None
                if name in declared:
                    raise ModelSpecError(number, f"variable '{name}' already declared on line {declared[name]}")
                declared[name] = number
                variables.append(Node(name, node_kind))

            elif section == "edges":
                match = ModelSpecParser.EDGE_PATTERN.match(line)
                if not match:
                    raise ModelSpecError(number, f"expected 'parent -> child : coefficient', got '{line}'")
                parent, child = match.group(1), match.group(2)
                if (parent, child) in seen_edges:
                    raise ModelSpecError(
                        number, f"edge {parent} -> {child} already declared on line {seen_edges[(parent, child)]}"
                    )
                seen_edges[(parent, child)] = number
                coefficient = ModelSpecParser._number(match.group(3), number, "coefficient")
                edges.append(EdgeSpec(parent, child, coefficient, number))

            elif section == "options":
                match = ModelSpecParser.OPTION_PATTERN.match(line)
                if not match:
                    raise ModelSpecError(number, f"expected 'key = value', got '{line}'")
                key, value = match.group(1), match.group(2).strip()
                if key == "standardized":
                    if value.lower() not in ("true", "false"):
                        raise ModelSpecError(number, f"standardized must be true or false, got '{value}'")
                    standardized = value.lower() == "true"
                elif key.startswith("noise_variance."):
                    name = key.split(".", 1)[1]
                    variance = ModelSpecParser._number(value, number, "noise variance")
                    if variance < 0:
                        raise ModelSpecError(number, f"noise variance of '{name}' must be >= 0")
                    noise[name] = variance
                    noise_line = noise_line or number
                else:
                    raise ModelSpecError(number, f"unknown option '{key}'")

            elif section == "outcome":
                match = ModelSpecParser.OPTION_PATTERN.match(line)
                if not match:
                    raise ModelSpecError(number, f"expected 'key = value', got '{line}'")
                key = match.group(1)
                if key not in ("treatment", "node", "f", "g", "noise_variance"):
                    raise ModelSpecError(number, f"unknown outcome key '{key}'")
                outcome_fields[key] = (match.group(2).strip(), number)

        for edge in edges:
            for endpoint in (edge.parent, edge.child):
                if endpoint not in declared:
                    raise ModelSpecError(
                        edge.line, f"edge {edge.parent} -> {edge.child} uses undeclared variable '{endpoint}'"
                    )
        if standardized and noise:
            raise ModelSpecError(noise_line, "noise_variance.* is only allowed when standardized = false")
        for name, line in ((n, noise_line) for n in noise):
            if name not in declared:
                raise ModelSpecError(line, f"noise variance given for undeclared variable '{name}'")

        outcome = None
        if outcome_line is not None:
            missing = [k for k in ("treatment", "node", "f", "g") if k not in outcome_fields]
            if missing:
                raise ModelSpecError(outcome_line, f"[outcome] is missing {', '.join(missing)}")
            values = {k: v for k, (v, _) in outcome_fields.items()}
            variance = 1.0
            if "noise_variance" in outcome_fields:
                text_value, line = outcome_fields["noise_variance"]
                variance = ModelSpecParser._number(text_value, line, "noise variance")
                if variance < 0:
                    raise ModelSpecError(line, "outcome noise variance must be >= 0")
            for key in ("treatment", "node"):
                if values[key] not in declared:
                    raise ModelSpecError(outcome_fields[key][1], f"undeclared variable '{values[key]}'")
            outcome = OutcomeSpec(values["treatment"], values["node"], values["f"], values["g"], variance, outcome_line)

        spec = ModelSpec(tuple(variables), tuple(edges), standardized, noise, outcome, source)
        logger.info(f"Parsed model spec {source or '<text>'}: {len(variables)} variables, {len(edges)} edges.")
        return spec


def parse_model_spec(text: str, source: Optional[str] = None) -> ModelSpec:
    return ModelSpecParser.parse(text, source=source)


def load_model_spec(path: Union[str, Path]) -> ModelSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ModelSpecError(None, f"cannot read model file {path}: {e}") from e
    return parse_model_spec(text, source=str(path))
