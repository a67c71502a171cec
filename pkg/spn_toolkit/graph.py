#!/usr/bin/env python3
"""
spn_toolkit/graph.py — SPN data model: node table, scopes, validity checking, weights.

An Spn is a flat, immutable node table in topological order: every child id is
strictly smaller than its parent's id, so acyclicity holds by construction and
a single ascending sweep schedules any upward pass.

Leaves are indicators of discrete variables (value index j of X_i) or
unit-variance Gaussian densities of continuous variables. Sum nodes carry one
non-negative weight per child; product nodes carry none.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Set, Tuple, Union

import numpy as np

from spn_toolkit.exceptions.spn_errors import DegenerateNodeError, MalformedGraphError

# Marker used in indicator-usage sets for continuous variables
CONTINUOUS_USE = -1


@dataclass(frozen=True)
class VariableTable:
    """
    Variables 0..d-1. An arity of None marks a continuous variable.
    """

    arities: Tuple[Optional[int], ...]

    def __post_init__(self):
        arities = tuple(self.arities)
        object.__setattr__(self, "arities", arities)
        if not arities:
            raise MalformedGraphError("Variable table must hold at least one variable")
        for var, arity in enumerate(arities):
            if arity is not None and (int(arity) != arity or arity < 2):
                raise MalformedGraphError(f"Variable {var} has arity {arity}; discrete arity must be >= 2")

    @classmethod
    def boolean(cls, count: int) -> "VariableTable":
        return cls((2,) * count)

    @classmethod
    def continuous(cls, count: int) -> "VariableTable":
        return cls((None,) * count)

    @property
    def count(self) -> int:
        return len(self.arities)

    def __len__(self) -> int:
        return len(self.arities)

    def is_continuous(self, var: int) -> bool:
        return self.arities[var] is None

    def arity(self, var: int) -> Optional[int]:
        return self.arities[var]


@dataclass(frozen=True)
class SumNode:
    children: Tuple[int, ...]
    weights: Tuple[float, ...]


@dataclass(frozen=True)
class ProductNode:
    children: Tuple[int, ...]


@dataclass(frozen=True)
class IndicatorLeaf:
    var: int
    value: int


@dataclass(frozen=True)
class GaussianLeaf:
    var: int
    mean: float
    variance: float = 1.0


Node = Union[SumNode, ProductNode, IndicatorLeaf, GaussianLeaf]
Scope = FrozenSet[int]


@dataclass(frozen=True)
class NodeArrays:
    """
    Array view of an Spn used by the inference passes.

    internal holds (node id, is_sum, child ids, log weights or None) in
    ascending id order.
    """

    internal: Tuple[Tuple[int, bool, np.ndarray, Optional[np.ndarray]], ...]
    indicator_nodes: np.ndarray
    indicator_vars: np.ndarray
    indicator_values: np.ndarray
    gaussian_nodes: np.ndarray
    gaussian_vars: np.ndarray
    gaussian_means: np.ndarray
    gaussian_stds: np.ndarray


@dataclass(frozen=True)
class Spn:
    nodes: Tuple[Node, ...]
    root: int
    variables: VariableTable

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        _check_node_table(self.nodes, self.root, self.variables)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def sum_nodes(self) -> List[int]:
        return [i for i, node in enumerate(self.nodes) if isinstance(node, SumNode)]

    @property
    def num_edges(self) -> int:
        return sum(len(node.children) for node in self.nodes if isinstance(node, (SumNode, ProductNode)))

    def children(self, node: int) -> Tuple[int, ...]:
        n = self.nodes[node]
        if isinstance(n, (SumNode, ProductNode)):
            return n.children
        return ()

    def reachable(self) -> Set[int]:
        """
        Ids of all nodes reachable from the root.
        """
        seen = {self.root}
        for i in range(self.root, -1, -1):
            if i in seen:
                seen.update(self.children(i))
        return seen

    def with_weights(self, weights: Mapping[int, Sequence[float]]) -> "Spn":
        """
        Return a copy whose listed sum nodes carry new weights.
        """
        nodes = list(self.nodes)
        for i, w in weights.items():
            node = nodes[i]
            if not isinstance(node, SumNode):
                raise MalformedGraphError(f"Node {i} is not a sum node")
            nodes[i] = SumNode(node.children, tuple(float(x) for x in w))
        reweighted = Spn(tuple(nodes), self.root, self.variables)
        # validity depends on structure only
        if "validity" in self.__dict__:
            reweighted.__dict__["validity"] = self.__dict__["validity"]
        return reweighted

    @cached_property
    def arrays(self) -> NodeArrays:
        internal = []
        ind_nodes, ind_vars, ind_vals = [], [], []
        g_nodes, g_vars, g_means, g_stds = [], [], [], []
        with np.errstate(divide="ignore"):
            for i, node in enumerate(self.nodes):
                if isinstance(node, SumNode):
                    internal.append((i, True, np.asarray(node.children, dtype=np.int64),
                                     np.log(np.asarray(node.weights, dtype=float))))
                elif isinstance(node, ProductNode):
                    internal.append((i, False, np.asarray(node.children, dtype=np.int64), None))
                elif isinstance(node, IndicatorLeaf):
                    ind_nodes.append(i)
                    ind_vars.append(node.var)
                    ind_vals.append(node.value)
                else:
                    g_nodes.append(i)
                    g_vars.append(node.var)
                    g_means.append(node.mean)
                    g_stds.append(math.sqrt(node.variance))
        return NodeArrays(
            internal=tuple(internal),
            indicator_nodes=np.asarray(ind_nodes, dtype=np.int64),
            indicator_vars=np.asarray(ind_vars, dtype=np.int64),
            indicator_values=np.asarray(ind_vals, dtype=float),
            gaussian_nodes=np.asarray(g_nodes, dtype=np.int64),
            gaussian_vars=np.asarray(g_vars, dtype=np.int64),
            gaussian_means=np.asarray(g_means, dtype=float),
            gaussian_stds=np.asarray(g_stds, dtype=float),
        )

    @cached_property
    def validity(self) -> "ValidityReport":
        return check_validity(self)


def _check_node_table(nodes: Sequence[Node], root: int, variables: VariableTable) -> None:
    if not nodes:
        raise MalformedGraphError("SPN has no nodes")
    if not 0 <= root < len(nodes):
        raise MalformedGraphError(f"Root id {root} outside node table of size {len(nodes)}")
    for i, node in enumerate(nodes):
        if isinstance(node, (SumNode, ProductNode)):
            if not node.children:
                raise MalformedGraphError(f"Node {i} has no children")
            for c in node.children:
                if not 0 <= c < i:
                    raise MalformedGraphError(f"Node {i} references child {c}; children must precede parents")
            if isinstance(node, SumNode):
                if len(node.weights) != len(node.children):
                    raise MalformedGraphError(
                        f"Sum node {i} has {len(node.weights)} weights for {len(node.children)} children"
                    )
                if len(set(node.children)) != len(node.children):
                    raise MalformedGraphError(f"Sum node {i} lists a child twice")
                for w in node.weights:
                    if not (math.isfinite(w) and w >= 0.0):
                        raise MalformedGraphError(f"Sum node {i} has invalid weight {w}")
        elif isinstance(node, IndicatorLeaf):
            if not 0 <= node.var < variables.count or variables.is_continuous(node.var):
                raise MalformedGraphError(f"Indicator {i} refers to non-discrete variable {node.var}")
            if not 0 <= node.value < variables.arity(node.var):
                raise MalformedGraphError(f"Indicator {i} value {node.value} outside arity of variable {node.var}")
        elif isinstance(node, GaussianLeaf):
            if not 0 <= node.var < variables.count or not variables.is_continuous(node.var):
                raise MalformedGraphError(f"Gaussian leaf {i} refers to non-continuous variable {node.var}")
            if not (node.variance > 0.0 and math.isfinite(node.mean)):
                raise MalformedGraphError(f"Gaussian leaf {i} has invalid parameters")
        else:
            raise MalformedGraphError(f"Node {i} has unknown type {type(node).__name__}")


class SpnBuilder:
    """
    Append-only construction helper. Ids are assigned in insertion order, so
    a node can only reference nodes created before it.
    """

    def __init__(self, variables: VariableTable):
        self.variables = variables
        self._nodes: List[Node] = []

    def __len__(self) -> int:
        return len(self._nodes)

    def _add(self, node: Node) -> int:
        self._nodes.append(node)
        return len(self._nodes) - 1

    def indicator(self, var: int, value: int) -> int:
        return self._add(IndicatorLeaf(var, value))

    def gaussian(self, var: int, mean: float, variance: float = 1.0) -> int:
        return self._add(GaussianLeaf(var, float(mean), float(variance)))

    def sum(self, children: Sequence[int], weights: Optional[Sequence[float]] = None) -> int:
        children = tuple(children)
        if weights is None:
            weights = [1.0 / len(children)] * len(children) if children else []
        return self._add(SumNode(children, tuple(float(w) for w in weights)))

    def product(self, children: Sequence[int]) -> int:
        return self._add(ProductNode(tuple(children)))

    def build(self, root: Optional[int] = None) -> Spn:
        if root is None:
            root = len(self._nodes) - 1
        return Spn(tuple(self._nodes), root, self.variables)


# ---------------------------------------------------------------------------
# Scopes and validity
# ---------------------------------------------------------------------------

def compute_scopes(spn: Spn) -> List[Scope]:
    """
    Scope of every node, indexed by node id.
    A leaf's scope is its variable; an internal node's scope is the union of
    its children's scopes.
    """
    scopes: List[Scope] = []
    for node in spn.nodes:
        if isinstance(node, (IndicatorLeaf, GaussianLeaf)):
            scopes.append(frozenset((node.var,)))
        else:
            scopes.append(frozenset().union(*(scopes[c] for c in node.children)))
    return scopes


def indicator_usage(spn: Spn) -> List[Dict[int, FrozenSet[int]]]:
    """
    For every node, the value indicators of each variable used in its sub-SPN.
    Continuous variables are recorded with CONTINUOUS_USE.
    """
    usage: List[Dict[int, FrozenSet[int]]] = []
    for node in spn.nodes:
        if isinstance(node, IndicatorLeaf):
            usage.append({node.var: frozenset((node.value,))})
        elif isinstance(node, GaussianLeaf):
            usage.append({node.var: frozenset((CONTINUOUS_USE,))})
        else:
            merged: Dict[int, FrozenSet[int]] = {}
            for c in node.children:
                for var, values in usage[c].items():
                    merged[var] = merged.get(var, frozenset()) | values
            usage.append(merged)
    return usage


class ViolationKind(str, Enum):
    INCOMPLETE = "incomplete"
    INCONSISTENT = "inconsistent"
    NOT_DECOMPOSABLE = "not-decomposable"


@dataclass(frozen=True)
class Violation:
    node: int
    kind: ViolationKind
    variables: Tuple[int, ...]
    children: Tuple[int, ...]


@dataclass(frozen=True)
class ValidityReport:
    complete: bool
    consistent: bool
    decomposable: bool
    violations: Tuple[Violation, ...]

    @property
    def valid(self) -> bool:
        """Complete and consistent, hence valid."""
        return self.complete and self.consistent

    def summary(self) -> str:
        return "complete={} consistent={} decomposable={}".format(
            str(self.complete).lower(), str(self.consistent).lower(), str(self.decomposable).lower()
        )


def check_validity(spn: Spn, scopes: Optional[Sequence[Scope]] = None) -> ValidityReport:
    """
    Check completeness of every sum node and consistency/decomposability of
    every product node, listing each violating node.

    A product is inconsistent on variable v when two or more of its children
    use v and the union of the value indicators they use for v holds more than
    one value (for Booleans: x_v in one child, x̄_v in another). A continuous
    variable shared by two children is always inconsistent.
    """
    if scopes is None:
        scopes = compute_scopes(spn)
    usage = indicator_usage(spn)
    violations: List[Violation] = []

    for i, node in enumerate(spn.nodes):
        if isinstance(node, SumNode):
            child_scopes = [scopes[c] for c in node.children]
            if any(s != child_scopes[0] for s in child_scopes[1:]):
                union = frozenset().union(*child_scopes)
                common = frozenset.intersection(*child_scopes)
                violations.append(Violation(
                    node=i,
                    kind=ViolationKind.INCOMPLETE,
                    variables=tuple(sorted(union - common)),
                    children=tuple(c for c in node.children if scopes[c] != union),
                ))
        elif isinstance(node, ProductNode):
            users: Dict[int, List[int]] = {}
            for c in node.children:
                for var in usage[c]:
                    users.setdefault(var, []).append(c)
            shared = {var: cs for var, cs in users.items() if len(cs) > 1}
            if not shared:
                continue
            violations.append(Violation(
                node=i,
                kind=ViolationKind.NOT_DECOMPOSABLE,
                variables=tuple(sorted(shared)),
                children=tuple(sorted({c for cs in shared.values() for c in cs})),
            ))
            conflicting = {}
            for var, cs in shared.items():
                values = frozenset().union(*(usage[c][var] for c in cs))
                if len(values) > 1 or CONTINUOUS_USE in values:
                    conflicting[var] = cs
            if conflicting:
                violations.append(Violation(
                    node=i,
                    kind=ViolationKind.INCONSISTENT,
                    variables=tuple(sorted(conflicting)),
                    children=tuple(sorted({c for cs in conflicting.values() for c in cs})),
                ))

    kinds = {v.kind for v in violations}
    return ValidityReport(
        complete=ViolationKind.INCOMPLETE not in kinds,
        consistent=ViolationKind.INCONSISTENT not in kinds,
        decomposable=ViolationKind.NOT_DECOMPOSABLE not in kinds,
        violations=tuple(violations),
    )


# ---------------------------------------------------------------------------
# Weights and structure metrics
# ---------------------------------------------------------------------------

def normalize_weights(spn: Spn) -> Spn:
    """
    Scale every sum node's weights to sum to 1, preserving their ratios.
    Raises DegenerateNodeError naming the first sum node whose weights are all zero.
    """
    new_weights: Dict[int, Tuple[float, ...]] = {}
    for i in spn.sum_nodes:
        w = np.asarray(spn.nodes[i].weights, dtype=float)
        total = w.sum()
        if not total > 0.0:
            raise DegenerateNodeError(i)
        new_weights[i] = tuple((w / total).tolist())
    return spn.with_weights(new_weights)


def uniform_weights(spn: Spn) -> Spn:
    return spn.with_weights({
        i: [1.0 / len(spn.nodes[i].children)] * len(spn.nodes[i].children) for i in spn.sum_nodes
    })


def decomposition_depth(spn: Spn) -> int:
    """
    Largest number of product nodes on any root-to-leaf path: the number of
    alternating sum/product layers between the root and the inputs.
    """
    depth = [0] * len(spn.nodes)
    for i, node in enumerate(spn.nodes):
        if isinstance(node, ProductNode):
            depth[i] = 1 + max(depth[c] for c in node.children)
        elif isinstance(node, SumNode):
            depth[i] = max(depth[c] for c in node.children)
    return depth[spn.root]
