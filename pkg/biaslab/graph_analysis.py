# biaslab/graph_analysis.py
# d-separation (reachability and path enumeration), open-path listing and
# the confounding / selection taxonomy of treatment-outcome associations.

import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import islice
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Tuple

import networkx as nx

from config import config
from biaslab.errors import InvalidInstrumentError, InvalidQueryError
from biaslab.scm import CausalGraph, Node, NodeKind

logger = logging.getLogger(__name__)

Path = Tuple[str, ...]


@dataclass(frozen=True)
class SeparationQuery:
    a: str
    b: str
    given: FrozenSet[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "given", frozenset(self.given))
        if self.a == self.b:
            raise InvalidQueryError(f"a separation query needs two distinct nodes, got '{self.a}' twice")
        if self.a in self.given or self.b in self.given:
            raise InvalidQueryError("the conditioning set must exclude both queried nodes")

    def validate(self, graph: CausalGraph) -> "SeparationQuery":
        graph.require(self.a, self.b, *sorted(self.given))
        return self

    def __str__(self) -> str:
        given = f" | {','.join(sorted(self.given))}" if self.given else ""
        return f"{self.a} _||_ {self.b}{given}"


# --- d-separation ---

_FROM_CHILD = "up"
_FROM_PARENT = "down"


def d_separated(graph: CausalGraph, query: SeparationQuery) -> bool:
    """
    Bayes-ball reachability: a ball leaves `a`; it passes a non-collider
    only if that node is unobserved, and bounces off a collider only if the
    collider or one of its descendants is observed.
    """
    query.validate(graph)
    given = query.given
    # Nodes that open a collider: the conditioning set and its ancestors.
    shaded = graph.ancestral_closure(given)

    visited = set()
    schedule = [(query.a, _FROM_CHILD)]
    while schedule:
        node, direction = schedule.pop()
        if node == query.b:
            return False
        if (node, direction) in visited:
            continue
        visited.add((node, direction))

        if direction == _FROM_CHILD and node not in given:
            schedule.extend((parent, _FROM_CHILD) for parent in graph.parents(node))
            schedule.extend((child, _FROM_PARENT) for child in graph.children(node))
        elif direction == _FROM_PARENT:
            if node in shaded:
                schedule.extend((parent, _FROM_CHILD) for parent in graph.parents(node))
            if node not in given:
                schedule.extend((child, _FROM_PARENT) for child in graph.children(node))
    return True


def _is_collider(graph: CausalGraph, left: str, node: str, right: str) -> bool:
    return graph.has_edge(left, node) and graph.has_edge(right, node)


def path_is_open(graph: CausalGraph, path: Path, given: FrozenSet[str], shaded: Optional[FrozenSet[str]] = None) -> bool:
    shaded = graph.ancestral_closure(given) if shaded is None else shaded
    for left, node, right in zip(path, path[1:], path[2:]):
        if _is_collider(graph, left, node, right):
            if node not in shaded:
                return False
        elif node in given:
            return False
    return True


def open_paths(
    graph: CausalGraph, a: str, b: str, given: Iterable[str] = (), limit: Optional[int] = None
) -> Tuple[List[Path], bool]:
    """
    All simple paths between a and b in the skeleton that are open given the
    conditioning set. Returns (paths, truncated); enumeration stops after
    `limit` open paths.
    """
    given = frozenset(given)
    graph.require(a, b, *sorted(given))
    shaded = graph.ancestral_closure(given)
    skeleton = graph.as_networkx().to_undirected(as_view=True)

    candidates = (tuple(p) for p in nx.all_simple_paths(skeleton, a, b))
    found = (p for p in candidates if path_is_open(graph, p, given, shaded))
    paths = list(found if limit is None else islice(found, limit + 1))
    truncated = limit is not None and len(paths) > limit
    if truncated:
        paths = paths[:limit]
        logger.warning(f"Open-path enumeration between {a} and {b} truncated at {limit} paths.")
    paths.sort(key=lambda p: (len(p), p))
    return paths, truncated


def d_separated_by_paths(graph: CausalGraph, query: SeparationQuery) -> bool:
    # Independent oracle for d_separated; exponential, small graphs only.
    query.validate(graph)
    paths, _ = open_paths(graph, query.a, query.b, query.given, limit=1)
    return not paths


def render_path(graph: CausalGraph, path: Path) -> str:
    parts = [path[0]]
    for left, right in zip(path, path[1:]):
        parts.append("->" if graph.has_edge(left, right) else "<-")
        parts.append(right)
    return " ".join(parts)


# --- Taxonomy ---

class PathLabel(str, Enum):
    CONFOUNDING = "Confounding"
    SELECTION = "SelectionInduced"


@dataclass(frozen=True)
class LabeledPath:
    nodes: Path
    label: PathLabel
    rendered: str
    virtual: bool = False  # passes through the outcome's own disturbance
    severed_by_randomization: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "path": self.rendered,
            "label": self.label.value,
            "virtual": self.virtual,
            "severed_by_randomization": self.severed_by_randomization,
        }


@dataclass(frozen=True)
class PathReport:
    treatment: str
    outcome: str
    conditioned: Tuple[str, ...]
    paths: Tuple[LabeledPath, ...]
    truncated: bool = False

    @property
    def open_paths(self) -> Tuple[Path, ...]:
        return tuple(p.nodes for p in self.paths)

    @property
    def has_confounding_component(self) -> bool:
        return any(p.label == PathLabel.CONFOUNDING for p in self.paths)

    @property
    def has_selection_component(self) -> bool:
        return any(p.label == PathLabel.SELECTION for p in self.paths)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "treatment": self.treatment,
            "outcome": self.outcome,
            "conditioned": list(self.conditioned),
            "has_confounding_component": self.has_confounding_component,
            "has_selection_component": self.has_selection_component,
            "truncated": self.truncated,
            "paths": [p.to_dict() for p in self.paths],
        }


def outcome_disturbance_name(graph: CausalGraph, outcome: str) -> str:
    name = f"U_{outcome}"
    while graph.has_node(name):
        name += "_"
    return name


def _is_directed(graph: CausalGraph, path: Path) -> bool:
    return all(graph.has_edge(u, v) for u, v in zip(path, path[1:]))


def _back_door_segment(graph: CausalGraph, path: Path) -> Tuple[str, ...]:
    # Nodes reached from the treatment by following arrows backwards.
    segment = []
    for child, parent in zip(path, path[1:]):
        if not graph.has_edge(parent, child):
            break
        segment.append(parent)
    return tuple(segment)


def bias_taxonomy(graph: CausalGraph, treatment: str, outcome: str, conditioned: Iterable[str] = ()) -> PathReport:
    """
    Lists the open non-causal paths between treatment and outcome and labels
    each Confounding when it leaves the treatment through a chain of its
    ancestors (a back-door segment), SelectionInduced otherwise.

    An ancestor of the treatment met further along a path, behind a collider
    or an outgoing edge, does not make the path Confounding: randomizing the
    treatment would leave such a path in place.

    The outcome's disturbance is added as an explicit latent parent U_<outcome>.
    A path that enters the outcome through an arrowhead and continues to that
    disturbance is open exactly when a descendant of the outcome is
    conditioned on; such paths are reported with virtual=True.
    """
    conditioned = tuple(dict.fromkeys(conditioned))
    graph.require(treatment, outcome, *conditioned)
    if treatment == outcome:
        raise InvalidQueryError("treatment and outcome must differ")
    if treatment in conditioned or outcome in conditioned:
        raise InvalidQueryError("the conditioning set must exclude the treatment and the outcome")

    disturbance = outcome_disturbance_name(graph, outcome)
    augmented = graph.with_node(Node(disturbance, NodeKind.LATENT), children=(outcome,))
    limit = config.PATH_LIMIT if len(augmented.nodes) > config.TAXONOMY_NODE_LIMIT else None

    direct, truncated = open_paths(augmented, treatment, outcome, conditioned, limit)
    through_disturbance, truncated_virtual = open_paths(augmented, treatment, disturbance, conditioned, limit)
    # Only paths that collide at the outcome; chains through it repeat a direct path.
    virtual = [p for p in through_disturbance if augmented.has_edge(p[-3], outcome)]

    labeled = []
    for path, is_virtual in [(p, False) for p in direct if not _is_directed(augmented, p)] + [(p, True) for p in virtual]:
        label = PathLabel.CONFOUNDING if _back_door_segment(augmented, path) else PathLabel.SELECTION
        labeled.append(
            LabeledPath(
                nodes=path,
                label=label,
                rendered=render_path(augmented, path),
                virtual=is_virtual,
                severed_by_randomization=augmented.has_edge(path[1], treatment),
            )
        )

    report = PathReport(treatment, outcome, conditioned, tuple(labeled), truncated or truncated_virtual)
    logger.info(
        f"Taxonomy {treatment} -> {outcome} | {list(conditioned)}: {len(labeled)} open paths "
        f"(confounding={report.has_confounding_component}, selection={report.has_selection_component})."
    )
    return report


# --- IV sensitivity prediction ---

class IVEffect(str, Enum):
    SENSITIVE = "Sensitive"
    INSENSITIVE = "Insensitive"


def iv_effect_prediction(
    graph: CausalGraph, treatment: str, outcome: str, iv: str, conditioned: Iterable[str] = ()
) -> IVEffect:
    """
    Predicts whether adding the instrument to the conditioning set changes
    the treatment-outcome association: Insensitive iff the outcome and the
    instrument are d-separated given the treatment and the conditioning set.
    """
    conditioned = frozenset(conditioned)
    graph.require(treatment, outcome, iv, *sorted(conditioned))
    if len({treatment, outcome, iv}) != 3:
        raise InvalidQueryError("treatment, outcome and instrument must be three distinct nodes")
    if conditioned & {treatment, outcome, iv}:
        raise InvalidQueryError("the conditioning set must exclude the treatment, the outcome and the instrument")

    if not d_separated(graph.without_outgoing(treatment), SeparationQuery(iv, outcome)):
        raise InvalidInstrumentError(f"'{iv}' reaches '{outcome}' other than through '{treatment}'")
    if d_separated(graph, SeparationQuery(iv, treatment)):
        raise InvalidInstrumentError(f"'{iv}' is not associated with '{treatment}'")

    separated = d_separated(graph, SeparationQuery(outcome, iv, conditioned | {treatment}))
    return IVEffect.INSENSITIVE if separated else IVEffect.SENSITIVE
