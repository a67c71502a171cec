#!/usr/bin/env python3
"""
spn_toolkit/oracle.py — Brute-force ground truth and fixture SPNs.

The oracle never uses the differentiation or MPE passes: it expands an SPN into
monomials by the distributive law, or sums single-state evaluations over every
complete state consistent with the evidence. Evaluating an SPN on one complete
state is exact whether or not the SPN is valid.

Exponential by nature; capped to small instances.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from spn_toolkit.exceptions.spn_errors import EvidenceError, InputError, OracleCapacityError
from spn_toolkit.graph import (
    GaussianLeaf,
    IndicatorLeaf,
    ProductNode,
    Spn,
    SpnBuilder,
    SumNode,
    VariableTable,
    normalize_weights,
)
from spn_toolkit.inference import Evidence, EvidenceBatch, evidence_matrix, log_values

MAX_TERMS = 200_000
MAX_STATES = 1 << 16

IndicatorSets = Tuple[Tuple[int, FrozenSet[int]], ...]


@dataclass(frozen=True)
class Monomial:
    """
    coefficient times the product of the listed indicators, given as sorted
    (variable, value indices) pairs.
    """

    coefficient: float
    indicators: IndicatorSets

    @property
    def contradictory(self) -> bool:
        return any(len(values) > 1 for _, values in self.indicators)

    def assignment(self) -> Dict[int, int]:
        return {var: next(iter(values)) for var, values in self.indicators if len(values) == 1}

    def value(self, evidence: Evidence) -> float:
        """
        Monomial value at the evidence: an observed variable zeroes every
        indicator except its own value's.
        """
        for var, values in self.indicators:
            observed = evidence.values[var]
            if observed is not None and values != frozenset((int(observed),)):
                return 0.0
        return self.coefficient


@dataclass(frozen=True)
class Expansion:
    monomials: Tuple[Monomial, ...]

    def __len__(self) -> int:
        return len(self.monomials)

    @property
    def contradictory(self) -> Tuple[Monomial, ...]:
        return tuple(m for m in self.monomials if m.contradictory)

    def evaluate(self, evidence: Evidence) -> float:
        return float(sum(m.value(evidence) for m in self.monomials))

    def collect(self) -> "Expansion":
        """Merge monomials with identical indicator sets."""
        merged: Dict[IndicatorSets, float] = {}
        for m in self.monomials:
            merged[m.indicators] = merged.get(m.indicators, 0.0) + m.coefficient
        return Expansion(tuple(Monomial(c, ind) for ind, c in merged.items()))

    def coefficient_of(self, assignment: Dict[int, int]) -> float:
        """Summed coefficient of the monomials that are exactly this assignment."""
        key = tuple(sorted((var, frozenset((val,))) for var, val in assignment.items()))
        return float(sum(m.coefficient for m in self.monomials if m.indicators == key))


def _merge(a: IndicatorSets, b: IndicatorSets) -> IndicatorSets:
    merged: Dict[int, FrozenSet[int]] = dict(a)
    for var, values in b:
        merged[var] = merged.get(var, frozenset()) | values
    return tuple(sorted(merged.items()))


def expand(spn: Spn, max_terms: int = MAX_TERMS) -> Expansion:
    """
    Distributive-law expansion of the sub-SPN under the root. Monomials with
    coefficient 0 are dropped; contradictory monomials (two values of one
    variable) are kept and flagged, witnessing inconsistency.
    """
    reachable = spn.reachable()
    terms: Dict[int, List[Tuple[float, IndicatorSets]]] = {}
    for i in sorted(reachable):
        node = spn.nodes[i]
        if isinstance(node, IndicatorLeaf):
            terms[i] = [(1.0, ((node.var, frozenset((node.value,))),))]
        elif isinstance(node, GaussianLeaf):
            raise InputError("Continuous leaves have no finite monomial expansion")
        elif isinstance(node, SumNode):
            out = []
            for child, w in zip(node.children, node.weights):
                if w == 0.0:
                    continue
                out.extend((w * c, ind) for c, ind in terms[child] if w * c != 0.0)
            terms[i] = out
        else:
            size = 1
            for child in node.children:
                size *= len(terms[child])
            if size > max_terms:
                raise OracleCapacityError(f"Expansion of node {i} needs {size} monomials (cap {max_terms})")
            out = [(1.0, ())]
            for child in node.children:
                out = [(c1 * c2, _merge(i1, i2)) for c1, i1 in out for c2, i2 in terms[child]]
            terms[i] = out
        if len(terms[i]) > max_terms:
            raise OracleCapacityError(f"Expansion of node {i} exceeds {max_terms} monomials")
    return Expansion(tuple(Monomial(c, ind) for c, ind in terms[spn.root]))


def _consistent_states(variables: VariableTable, evidence: Evidence, max_states: int) -> np.ndarray:
    axes = []
    for var in range(variables.count):
        observed = evidence.values[var]
        if variables.is_continuous(var):
            if observed is None:
                raise EvidenceError(f"Continuous variable {var} must be observed for enumeration")
            axes.append([float(observed)])
        elif observed is None:
            axes.append(list(range(variables.arity(var))))
        else:
            axes.append([int(observed)])
    total = int(np.prod([len(a) for a in axes], dtype=float))
    if total > max_states:
        raise OracleCapacityError(f"Enumeration needs {total} states (cap {max_states})")
    return np.array(list(itertools.product(*axes)), dtype=float).reshape(total, variables.count)


def brute_phi(spn: Spn, evidence: Evidence, max_states: int = MAX_STATES) -> float:
    """
    Phi_S(e): the sum of S(x) over every complete state x consistent with e.
    """
    evidence_matrix(spn.variables, evidence)
    states = _consistent_states(spn.variables, evidence, max_states)
    values = log_values(spn, states)[spn.root]
    return float(np.exp(values).sum())


def brute_phi_batch(spn: Spn, data: EvidenceBatch, max_states: int = MAX_STATES) -> np.ndarray:
    """
    brute_phi for every evidence row, enumerating the complete states once.
    Discrete variables only.
    """
    x = evidence_matrix(spn.variables, data)
    states = _consistent_states(spn.variables, Evidence.marginal(spn.variables.count), max_states)
    probs = np.exp(log_values(spn, states)[spn.root])
    consistent = np.all(np.isnan(x[:, None, :]) | (x[:, None, :] == states[None, :, :]), axis=2)
    return consistent.astype(float) @ probs


def brute_marginals(spn: Spn, evidence: Evidence, max_states: int = MAX_STATES) -> Dict[int, np.ndarray]:
    """
    P(X_s = t | e) = Phi(e, X_s = t) / Phi(e) for every discrete variable.
    """
    evidence_matrix(spn.variables, evidence)
    states = _consistent_states(spn.variables, evidence, max_states)
    probs = np.exp(log_values(spn, states)[spn.root])
    total = probs.sum()
    result: Dict[int, np.ndarray] = {}
    for var in range(spn.variables.count):
        if spn.variables.is_continuous(var):
            continue
        arity = spn.variables.arity(var)
        result[var] = np.array([probs[states[:, var] == t].sum() for t in range(arity)]) / total
    return result


def brute_mpe(spn: Spn, evidence: Evidence, max_terms: int = MAX_TERMS) -> Tuple[float, Optional[Monomial]]:
    """
    Largest coefficient among the non-contradictory monomials consistent with e.
    """
    best: Optional[Monomial] = None
    for m in expand(spn, max_terms).monomials:
        if m.contradictory or m.value(evidence) == 0.0:
            continue
        if best is None or m.coefficient > best.coefficient:
            best = m
    return (best.coefficient if best else 0.0), best


def enumerate_evidence(variables: VariableTable) -> np.ndarray:
    """
    Every evidence vector over discrete variables: each variable marginalized
    (NaN) or observed at one of its values. 3^d rows for d Booleans.
    """
    axes = []
    for var in range(variables.count):
        if variables.is_continuous(var):
            raise InputError("Evidence enumeration needs discrete variables")
        axes.append([np.nan] + list(range(variables.arity(var))))
    return np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, variables.count)


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

def build_two_variable_mixture() -> Spn:
    """
    Naive Bayes mixture with three components over two Boolean variables:
    0.5(0.6x1 + 0.4x̄1)(0.3x2 + 0.7x̄2) + 0.2(0.6x1 + 0.4x̄1)(0.2x2 + 0.8x̄2)
    + 0.3(0.9x1 + 0.1x̄1)(0.2x2 + 0.8x̄2). Value index 1 is "true".
    """
    b = SpnBuilder(VariableTable.boolean(2))
    x1, nx1 = b.indicator(0, 1), b.indicator(0, 0)
    x2, nx2 = b.indicator(1, 1), b.indicator(1, 0)
    a = b.sum([x1, nx1], [0.6, 0.4])
    bb = b.sum([x1, nx1], [0.9, 0.1])
    c = b.sum([x2, nx2], [0.3, 0.7])
    d = b.sum([x2, nx2], [0.2, 0.8])
    p1 = b.product([a, c])
    p2 = b.product([a, d])
    p3 = b.product([bb, d])
    b.sum([p1, p2, p3], [0.5, 0.2, 0.3])
    return b.build()


def build_even_parity(n: int) -> Spn:
    """
    Uniform distribution over the states of n Booleans with an even number of
    ones. Two running nodes per prefix (even / odd parity so far) keep the
    size linear in n.
    """
    if n < 1:
        raise InputError("Parity SPN needs at least one variable")
    b = SpnBuilder(VariableTable.boolean(n))
    even, odd = b.indicator(0, 0), b.indicator(0, 1)
    for var in range(1, n):
        pos, neg = b.indicator(var, 1), b.indicator(var, 0)
        even_next = b.sum([b.product([even, neg]), b.product([odd, pos])], [0.5, 0.5])
        odd_next = b.sum([b.product([odd, neg]), b.product([even, pos])], [0.5, 0.5])
        even, odd = even_next, odd_next
    return b.build(root=even)


class _RandomBuilder:
    """
    Recursive random SPN over random variable-set partitions.

    mode "decomposable": products over disjoint parts.
    mode "consistent": some products also take an indicator of a variable
    already in one part, with that part pinned to the same value.
    mode "inconsistent": every product takes an indicator whose value
    contradicts the value pinned in the part.
    mode "incomplete": every sum over two or more variables gets one child
    over a strict subset of its scope.
    """

    def __init__(self, rng: np.random.Generator, variables: VariableTable, mode: str):
        self.rng = rng
        self.variables = variables
        self.mode = mode
        self.builder = SpnBuilder(variables)

    def weights(self, n: int) -> List[float]:
        return self.rng.uniform(0.1, 1.0, size=n).tolist()

    def variable(self, var: int, pinned: Dict[int, int]) -> int:
        if var in pinned:
            return self.builder.indicator(var, pinned[var])
        arity = self.variables.arity(var)
        leaves = [self.builder.indicator(var, t) for t in range(arity)]
        return self.builder.sum(leaves, self.weights(arity))

    def region(self, scope: Sequence[int], depth: int, pinned: Dict[int, int]) -> int:
        if len(scope) == 1:
            return self.variable(scope[0], pinned)
        if depth == 0:
            return self.builder.product([self.variable(v, pinned) for v in scope])
        n_children = int(self.rng.integers(2, 4))
        children = [self.product(scope, depth, pinned) for _ in range(n_children)]
        if self.mode == "incomplete":
            dropped = int(self.rng.integers(len(scope)))
            subset = [v for k, v in enumerate(scope) if k != dropped]
            children.append(self.region(subset, depth - 1, pinned))
        return self.builder.sum(children, self.weights(len(children)))

    def product(self, scope: Sequence[int], depth: int, pinned: Dict[int, int]) -> int:
        perm = [int(v) for v in self.rng.permutation(scope)]
        n_parts = int(self.rng.integers(2, min(3, len(perm)) + 1))
        cuts = sorted(self.rng.choice(np.arange(1, len(perm)), size=n_parts - 1, replace=False).tolist())
        parts = [sorted(p) for p in np.split(np.array(perm), cuts)]

        extra = None
        part_pins = [dict(pinned) for _ in parts]
        tie = self.mode == "consistent" and self.rng.random() < 0.5
        if tie or self.mode == "inconsistent":
            k = int(self.rng.integers(len(parts)))
            var = int(self.rng.choice(parts[k]))
            arity = self.variables.arity(var)
            value = pinned.get(var, int(self.rng.integers(arity)))
            part_pins[k][var] = value
            if self.mode == "inconsistent":
                value = (value + 1 + int(self.rng.integers(arity - 1))) % arity
            extra = (var, value)

        children = [self.region([int(v) for v in part], depth - 1, pins) for part, pins in zip(parts, part_pins)]
        if extra is not None:
            children.append(self.builder.indicator(*extra))
        return self.builder.product(children)


def _random_spn(seed: int, d: int, depth: int, mode: str, arity: int, normalized: bool) -> Spn:
    if d < 1:
        raise InputError("Random SPN needs at least one variable")
    rng = np.random.default_rng(seed)
    variables = VariableTable((arity,) * d)
    builder = _RandomBuilder(rng, variables, mode)
    scope = list(range(d))
    if d == 1:
        root = builder.variable(0, {})
    else:
        root = builder.region(scope, max(depth, 1), {})
    spn = builder.builder.build(root)
    return normalize_weights(spn) if normalized else spn


def random_valid_spn(seed: int, d: int, depth: int = 3, decomposable: bool = True,
                     arity: int = 2, normalized: bool = True) -> Spn:
    """
    Random SPN that is complete and consistent by construction; decomposable
    when requested, otherwise products may repeat a variable pinned to one value.
    """
    return _random_spn(seed, d, depth, "decomposable" if decomposable else "consistent", arity, normalized)


def random_invalid_spn(seed: int, d: int, kind: str, depth: int = 3, arity: int = 2) -> Spn:
    """
    kind "inconsistent": complete but inconsistent.
    kind "incomplete": consistent (decomposable) but incomplete; needs d >= 2.
    """
    if kind not in ("inconsistent", "incomplete"):
        raise InputError(f"Unknown invalid SPN kind: {kind}")
    if kind == "incomplete" and d < 2:
        raise InputError("An incomplete SPN needs at least two variables")
    return _random_spn(seed, d, depth, kind, arity, normalized=True)


def sample_states(spn: Spn, n: int, seed: int) -> np.ndarray:
    """
    Ancestral samples from a normalized, valid SPN: weighted child choice at
    sums, every child at products. Returns an (n, d) array.
    """
    rng = np.random.default_rng(seed)
    samples = np.full((n, spn.variables.count), np.nan)
    for row in samples:
        stack = [spn.root]
        while stack:
            node = spn.nodes[stack.pop()]
            if isinstance(node, SumNode):
                w = np.asarray(node.weights)
                stack.append(node.children[int(rng.choice(len(w), p=w / w.sum()))])
            elif isinstance(node, ProductNode):
                stack.extend(node.children)
            elif isinstance(node, IndicatorLeaf):
                row[node.var] = node.value
            else:
                row[node.var] = rng.normal(node.mean, np.sqrt(node.variance))
    return samples
