# biaslab/scm.py
# Linear structural causal models: the causal graph, path coefficients,
# implied covariance matrices and interventional (do) effects.

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from types import MappingProxyType
from typing import TYPE_CHECKING, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from config import config
from biaslab.errors import (
    CyclicGraphError,
    InfeasibleModelError,
    InfeasibleStandardizationError,
    InvalidQueryError,
    ModelSpecError,
    SingularDesignError,
    UnknownNodeError,
)

if TYPE_CHECKING:
    from biaslab.modelspec import ModelSpec

logger = logging.getLogger(__name__)

Edge = Tuple[str, str]


class NodeKind(str, Enum):
    OBSERVED = "observed"
    LATENT = "latent"
    SELECTION = "selection"


@dataclass(frozen=True)
class Node:
    name: str
    kind: NodeKind = NodeKind.OBSERVED


class CausalGraph:
    """
    Immutable DAG of observed, latent and selection variables.
    Node order is the declaration order; every matrix in this package is
    indexed by it.
    """

    def __init__(self, nodes: Sequence[Node], edges: Iterable[Edge]):
        graph = nx.DiGraph()
        kinds: Dict[str, NodeKind] = {}
        for node in nodes:
            if not node.name.isidentifier():
                raise ModelSpecError(None, f"'{node.name}' is not a valid variable name")
            if node.name in kinds:
                raise ModelSpecError(None, f"variable '{node.name}' declared twice")
            kinds[node.name] = NodeKind(node.kind)
            graph.add_node(node.name)

        for parent, child in edges:
            for endpoint in (parent, child):
                if endpoint not in kinds:
                    raise UnknownNodeError(endpoint)
            if graph.has_edge(parent, child):
                raise ModelSpecError(None, f"duplicate edge {parent} -> {child}")
            graph.add_edge(parent, child)

        if not nx.is_directed_acyclic_graph(graph):
            raise CyclicGraphError(nx.find_cycle(graph))

        self._names: Tuple[str, ...] = tuple(kinds)
        self._kinds = MappingProxyType(kinds)
        self._index = MappingProxyType({name: i for i, name in enumerate(self._names)})
        self._graph = nx.freeze(graph)
        self._order = tuple(
            nx.lexicographical_topological_sort(graph, key=lambda n: self._index[n])
        )

    # --- Basic structure ---

    @property
    def nodes(self) -> Tuple[str, ...]:
        return self._names

    @property
    def edges(self) -> Tuple[Edge, ...]:
        return tuple(
            sorted(self._graph.edges, key=lambda e: (self._index[e[1]], self._index[e[0]]))
        )

    @property
    def topological_order(self) -> Tuple[str, ...]:
        return self._order

    def kind(self, name: str) -> NodeKind:
        self.require(name)
        return self._kinds[name]

    def index(self, name: str) -> int:
        self.require(name)
        return self._index[name]

    def has_node(self, name: str) -> bool:
        return name in self._index

    def require(self, *names: str) -> None:
        for name in names:
            if name not in self._index:
                raise UnknownNodeError(name)

    def has_edge(self, parent: str, child: str) -> bool:
        return self._graph.has_edge(parent, child)

    def parents(self, name: str) -> Tuple[str, ...]:
        self.require(name)
        return tuple(sorted(self._graph.predecessors(name), key=self._index.__getitem__))

    def children(self, name: str) -> Tuple[str, ...]:
        self.require(name)
        return tuple(sorted(self._graph.successors(name), key=self._index.__getitem__))

    def ancestors(self, name: str) -> frozenset:
        self.require(name)
        return frozenset(nx.ancestors(self._graph, name))

    def descendants(self, name: str) -> frozenset:
        self.require(name)
        return frozenset(nx.descendants(self._graph, name))

    def ancestral_closure(self, names: Iterable[str]) -> frozenset:
        # The given nodes together with all their ancestors.
        closure = set()
        for name in names:
            closure.add(name)
            closure |= self.ancestors(name)
        return frozenset(closure)

    def nodes_of_kind(self, kind: NodeKind) -> Tuple[str, ...]:
        return tuple(n for n in self._names if self._kinds[n] == kind)

    def as_networkx(self) -> nx.DiGraph:
        return self._graph

    # --- Derived graphs ---

    def _node_list(self) -> List[Node]:
        return [Node(n, self._kinds[n]) for n in self._names]

    def without_incoming(self, name: str) -> "CausalGraph":
        self.require(name)
        return CausalGraph(self._node_list(), [e for e in self.edges if e[1] != name])

    def without_outgoing(self, name: str) -> "CausalGraph":
        self.require(name)
        return CausalGraph(self._node_list(), [e for e in self.edges if e[0] != name])

    def with_node(self, node: Node, children: Sequence[str] = ()) -> "CausalGraph":
        edges = list(self.edges) + [(node.name, child) for child in children]
        return CausalGraph(self._node_list() + [node], edges)

    def __repr__(self) -> str:
        return f"CausalGraph(nodes={list(self._names)}, edges={list(self.edges)})"


@dataclass(frozen=True)
class EvaluationPoint:
    assignments: Mapping[str, float]

    def validate(self, graph: CausalGraph) -> "EvaluationPoint":
        graph.require(*self.assignments)
        return self

    def __getitem__(self, name: str) -> float:
        return self.assignments[name]


@dataclass(frozen=True)
class CovarianceMatrix:
    names: Tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def _idx(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownNodeError(name) from None

    def get(self, a: str, b: str) -> float:
        return float(self.values[self._idx(a), self._idx(b)])

    def variance(self, name: str) -> float:
        return self.get(name, name)

    def submatrix(self, rows: Sequence[str], cols: Optional[Sequence[str]] = None) -> np.ndarray:
        cols = rows if cols is None else cols
        return self.values[np.ix_([self._idx(r) for r in rows], [self._idx(c) for c in cols])]

    def is_psd(self, tol: float = 1e-10) -> bool:
        return bool(np.all(np.linalg.eigvalsh(self.values) >= -tol))


@dataclass(frozen=True)
class LinearSCM:
    graph: CausalGraph
    coefficients: Mapping[Edge, float]
    noise_variances: Mapping[str, float]
    standardized: bool = False

    def __post_init__(self):
        coefficients = dict(self.coefficients)
        if set(coefficients) != set(self.graph.edges):
            missing = set(self.graph.edges) ^ set(coefficients)
            raise InfeasibleModelError(f"coefficients do not match the graph edges: {sorted(missing)}")
        for edge, value in coefficients.items():
            if not math.isfinite(value):
                raise InfeasibleModelError(f"coefficient on {edge[0]} -> {edge[1]} is not finite")

        noise = dict(self.noise_variances)
        for name in noise:
            self.graph.require(name)
        for name in self.graph.nodes:
            value = noise.get(name)
            if value is None or not math.isfinite(value) or value < 0:
                raise InfeasibleModelError(f"noise variance of '{name}' must be a finite value >= 0")

        object.__setattr__(self, "coefficients", MappingProxyType(coefficients))
        object.__setattr__(self, "noise_variances", MappingProxyType(noise))

        if self.standardized:
            diag = np.diag(self.covariance.values)
            worst = int(np.argmax(np.abs(diag - 1.0)))
            if abs(diag[worst] - 1.0) > config.STANDARDIZATION_TOL:
                raise InfeasibleStandardizationError(self.graph.nodes[worst], float(diag[worst] - 1.0))

    def coefficient(self, parent: str, child: str) -> float:
        return self.coefficients.get((parent, child), 0.0)

    @cached_property
    def path_matrix(self) -> np.ndarray:
        # B[child, parent] so that V = B V + e.
        n = len(self.graph.nodes)
        b = np.zeros((n, n))
        for (parent, child), value in self.coefficients.items():
            b[self.graph.index(child), self.graph.index(parent)] = value
        b.setflags(write=False)
        return b

    @cached_property
    def total_effects(self) -> np.ndarray:
        # (I - B)^-1: entry [i, j] sums path products over directed paths j -> i.
        n = len(self.graph.nodes)
        t = np.linalg.solve(np.eye(n) - self.path_matrix, np.eye(n))
        t.setflags(write=False)
        return t

    @cached_property
    def covariance(self) -> CovarianceMatrix:
        psi = np.diag([self.noise_variances[n] for n in self.graph.nodes])
        t = self.total_effects
        sigma = t @ psi @ t.T
        return CovarianceMatrix(self.graph.nodes, (sigma + sigma.T) / 2.0)


# --- Construction ---

def standardized_noise_variances(graph: CausalGraph, coefficients: Mapping[Edge, float]) -> Dict[str, float]:
    """
    Derives each residual variance as 1 - Var(linear parent combination),
    walking the graph in topological order so parent covariances are known.
    """
    idx = {name: i for i, name in enumerate(graph.nodes)}
    sigma = np.zeros((len(idx), len(idx)))
    noise: Dict[str, float] = {}

    for node in graph.topological_order:
        i = idx[node]
        parents = graph.parents(node)
        if not parents:
            noise[node] = 1.0
            sigma[i, i] = 1.0
            continue
        p = [idx[q] for q in parents]
        b = np.array([coefficients[(q, node)] for q in parents])
        explained = float(b @ sigma[np.ix_(p, p)] @ b)
        residual = 1.0 - explained
        if residual < -config.STANDARDIZATION_TOL:
            raise InfeasibleStandardizationError(node, -residual)
        noise[node] = max(residual, 0.0)
        row = b @ sigma[p, :]
        sigma[i, :] = row
        sigma[:, i] = row
        sigma[i, i] = 1.0
    return noise


def build_model(spec: "ModelSpec") -> LinearSCM:
    graph = CausalGraph(spec.variables, [(e.parent, e.child) for e in spec.edges])

    coefficients: Dict[Edge, float] = {}
    for edge in spec.edges:
        if not math.isfinite(edge.coefficient):
            raise ModelSpecError(edge.line, f"coefficient on {edge.parent} -> {edge.child} is not finite")
        coefficients[(edge.parent, edge.child)] = edge.coefficient

    if spec.standardized:
        noise = standardized_noise_variances(graph, coefficients)
    else:
        for name in spec.noise_variances:
            graph.require(name)
        noise = {name: float(spec.noise_variances.get(name, 1.0)) for name in graph.nodes}

    model = LinearSCM(graph, coefficients, noise, standardized=spec.standardized)
    logger.info(
        f"Built model with {len(graph.nodes)} nodes and {len(coefficients)} edges "
        f"(standardized={spec.standardized})."
    )
    return model


# --- Operations ---

def implied_covariance(model: LinearSCM) -> CovarianceMatrix:
    return model.covariance


def total_effect(model: LinearSCM, treatment: str, outcome: str) -> float:
    model.graph.require(treatment, outcome)
    return float(model.total_effects[model.graph.index(outcome), model.graph.index(treatment)])


def solve_guarded(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    # Refuses to invert near-singular systems instead of returning noise.
    cond = np.linalg.cond(matrix) if matrix.size else 1.0
    if not np.isfinite(cond) or cond > config.CONDITION_LIMIT:
        raise SingularDesignError(f"design is singular or ill-conditioned (condition number {cond:.3g})")
    return np.linalg.solve(matrix, rhs)


def partial_regression_slope(
    model: LinearSCM, outcome: str, regressor: str, conditioning: Iterable[str] = ()
) -> float:
    conditioning = tuple(dict.fromkeys(conditioning))
    model.graph.require(outcome, regressor, *conditioning)
    if outcome == regressor:
        raise InvalidQueryError("outcome and regressor must differ")
    if outcome in conditioning or regressor in conditioning:
        raise InvalidQueryError("conditioning set must exclude the outcome and the regressor")

    cov = model.covariance
    design = (regressor,) + conditioning
    coef = solve_guarded(cov.submatrix(design), cov.submatrix(design, (outcome,))[:, 0])
    return float(coef[0])


def partial_correlation(cov: CovarianceMatrix, a: str, b: str, given: Iterable[str] = ()) -> float:
    names = (a, b) + tuple(g for g in dict.fromkeys(given) if g not in (a, b))
    sub = cov.submatrix(names)
    precision = solve_guarded(sub, np.eye(len(names)))
    denom = math.sqrt(precision[0, 0] * precision[1, 1])
    return float(-precision[0, 1] / denom)


def intervene(model: LinearSCM, node: str) -> LinearSCM:
    """Truncated model for do(node): incoming edges cut, marginal variance kept."""
    graph = model.graph.without_incoming(node)
    coefficients = {e: v for e, v in model.coefficients.items() if e[1] != node}
    noise = dict(model.noise_variances)
    noise[node] = model.covariance.variance(node)
    return LinearSCM(graph, coefficients, noise, standardized=False)


def path_tracing_covariance(model: LinearSCM) -> CovarianceMatrix:
    """
    Wright's rule by explicit enumeration: every trek is a pair of directed
    paths leaving a common source t, weighted by the disturbance variance of t.
    Only intended as an oracle for small graphs.
    """
    graph = model.graph
    if len(graph.nodes) > config.TRACING_NODE_LIMIT:
        raise InvalidQueryError(
            f"path tracing is limited to {config.TRACING_NODE_LIMIT} nodes, got {len(graph.nodes)}"
        )
    g = graph.as_networkx()

    def path_sum(source: str, target: str) -> float:
        if source == target:
            return 1.0
        total = 0.0
        for path in nx.all_simple_paths(g, source, target):
            total += math.prod(model.coefficient(u, v) for u, v in zip(path, path[1:]))
        return total

    sums = {(s, t): path_sum(s, t) for s in graph.nodes for t in graph.nodes}
    n = len(graph.nodes)
    sigma = np.zeros((n, n))
    for i, a in enumerate(graph.nodes):
        for j, b in enumerate(graph.nodes):
            sigma[i, j] = sum(
                model.noise_variances[t] * sums[(t, a)] * sums[(t, b)] for t in graph.nodes
            )
    return CovarianceMatrix(graph.nodes, sigma)
