#!/usr/bin/env python3
"""
spn_toolkit/inference.py — Exact inference on SPNs in log space.

Evidence follows the indicator convention: indicators compatible with the
evidence are 1, the rest 0, and a marginalized variable has all its indicators
set to 1. A Gaussian leaf over an observed variable takes its density at the
observation; over a marginalized variable it takes the value 1.

Every pass is vectorised over a batch axis: node values are arrays of shape
(number of nodes, batch size). Exact zeros are -inf.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from spn_toolkit.exceptions.spn_errors import EvidenceError, InvalidSpnError, ZeroEvidenceError
from spn_toolkit.graph import GaussianLeaf, IndicatorLeaf, ProductNode, Spn, SumNode, VariableTable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Evidence:
    """
    One entry per variable: None when marginalized, otherwise the observed
    value index (discrete) or real value (continuous).
    """

    values: Tuple[Optional[float], ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))

    @classmethod
    def marginal(cls, count: int) -> "Evidence":
        return cls((None,) * count)

    @classmethod
    def of(cls, *values: Optional[float]) -> "Evidence":
        return cls(values)

    @classmethod
    def from_array(cls, row: Sequence[float]) -> "Evidence":
        """NaN entries become marginalized."""
        return cls(tuple(None if v is None or math.isnan(v) else v for v in np.asarray(row, dtype=float).tolist()))

    def __len__(self) -> int:
        return len(self.values)

    def observed(self, var: int) -> bool:
        return self.values[var] is not None

    def as_array(self) -> np.ndarray:
        return np.array([np.nan if v is None else float(v) for v in self.values], dtype=float)


EvidenceBatch = Union[Evidence, Sequence[Evidence], np.ndarray]


class MpeMode(str, Enum):
    MAX_MAX = "max-max"
    SUM_UP_MAX_DOWN = "sum-up-max-down"


def evidence_matrix(variables: VariableTable, data: EvidenceBatch) -> np.ndarray:
    """
    Convert evidence into a (batch, variables) float matrix with NaN for
    marginalized entries, validating it against the variable table.
    """
    if isinstance(data, Evidence):
        x = data.as_array()[None, :]
    elif isinstance(data, np.ndarray):
        x = np.atleast_2d(np.asarray(data, dtype=float))
    else:
        rows = [e.as_array() if isinstance(e, Evidence) else np.asarray(e, dtype=float) for e in data]
        x = np.vstack(rows) if rows else np.empty((0, variables.count))
    if x.ndim != 2 or x.shape[1] != variables.count:
        raise EvidenceError(f"Evidence has {x.shape[-1]} entries; the SPN has {variables.count} variables")

    discrete = [v for v in range(variables.count) if not variables.is_continuous(v)]
    if discrete and x.shape[0]:
        block = x[:, discrete]
        observed = ~np.isnan(block)
        arities = np.array([variables.arity(v) for v in discrete], dtype=float)
        bad = observed & ((block != np.floor(block)) | (block < 0) | (block >= arities[None, :]))
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise EvidenceError(
                f"Value {block[row, col]} is not a valid index for variable {discrete[col]} "
                f"(arity {variables.arity(discrete[col])})"
            )
    continuous = [v for v in range(variables.count) if variables.is_continuous(v)]
    if continuous and x.shape[0] and np.isinf(x[:, continuous]).any():
        raise EvidenceError("Continuous evidence must be finite")
    return x


def _require_valid(spn: Spn, require_valid: bool) -> None:
    if require_valid and not spn.validity.valid:
        raise InvalidSpnError(f"SPN is not valid ({spn.validity.summary()})")


def _leaf_log_values(spn: Spn, x: np.ndarray) -> np.ndarray:
    arrays = spn.arrays
    up = np.zeros((len(spn.nodes), x.shape[0]))
    if arrays.indicator_nodes.size:
        obs = x[:, arrays.indicator_vars].T
        match = np.isnan(obs) | (obs == arrays.indicator_values[:, None])
        up[arrays.indicator_nodes] = np.where(match, 0.0, -np.inf)
    if arrays.gaussian_nodes.size:
        obs = x[:, arrays.gaussian_vars].T
        dens = norm.logpdf(obs, loc=arrays.gaussian_means[:, None], scale=arrays.gaussian_stds[:, None])
        up[arrays.gaussian_nodes] = np.where(np.isnan(obs), 0.0, dens)
    return up


def log_values(spn: Spn, data: EvidenceBatch, maximize: bool = False) -> np.ndarray:
    """
    Upward pass. Returns log S_n(e) for every node n and every instance,
    shape (nodes, batch). With maximize=True sums become weighted maxima.
    """
    x = evidence_matrix(spn.variables, data)
    up = _leaf_log_values(spn, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        for node, is_sum, children, log_w in spn.arrays.internal:
            if is_sum:
                terms = log_w[:, None] + up[children]
                up[node] = terms.max(axis=0) if maximize else logsumexp(terms, axis=0)
            else:
                up[node] = up[children].sum(axis=0)
    return up


def evaluate(spn: Spn, evidence: Evidence, require_valid: bool = True) -> float:
    """
    log S(e). With every variable marginalized this is log Z_S.
    require_valid=False permits raw evaluation of invalid SPNs.
    """
    _require_valid(spn, require_valid)
    return float(log_values(spn, evidence)[spn.root, 0])


def log_likelihoods(spn: Spn, data: EvidenceBatch, require_valid: bool = True) -> np.ndarray:
    _require_valid(spn, require_valid)
    return log_values(spn, data)[spn.root]


def log_partition(spn: Spn) -> float:
    return evaluate(spn, Evidence.marginal(spn.variables.count))


# ---------------------------------------------------------------------------
# Differentiation pass
# ---------------------------------------------------------------------------

@dataclass
class PassState:
    """
    up: log S_n(e), down: log dS(e)/dS_n(e), both (nodes, batch).
    edges: per sum node, log dS(e)/dw_ij = down[i] + up[j], (children, batch).
    """

    up: np.ndarray
    down: np.ndarray
    edges: Dict[int, np.ndarray]
    root: int

    @property
    def log_evidence(self) -> np.ndarray:
        return self.up[self.root]


def _sibling_log_products(values: np.ndarray) -> np.ndarray:
    """
    For each row p, the log of the product of every other row, without
    subtracting -inf from -inf.
    """
    neg_inf = np.isneginf(values)
    own = np.where(neg_inf, 0.0, values)
    total = own.sum(axis=0)
    others = total[None, :] - own
    others_inf = neg_inf.sum(axis=0)[None, :] - neg_inf.astype(np.int64)
    return np.where(others_inf > 0, -np.inf, others)


def backward_pass(spn: Spn, data: EvidenceBatch, require_valid: bool = True) -> PassState:
    """
    Upward sum pass followed by the downward derivative pass:
    sum parents contribute w_ki * dS/dS_k, product parents contribute
    dS/dS_k times the product of the other children.
    """
    _require_valid(spn, require_valid)
    up = log_values(spn, data)
    down = np.full_like(up, -np.inf)
    down[spn.root] = 0.0
    edges: Dict[int, np.ndarray] = {}
    with np.errstate(divide="ignore", invalid="ignore"):
        for node, is_sum, children, log_w in reversed(spn.arrays.internal):
            if node > spn.root:
                continue
            d = down[node][None, :]
            if is_sum:
                edges[node] = d + up[children]
                contributions = d + log_w[:, None]
            else:
                contributions = d + _sibling_log_products(up[children])
            for pos, child in enumerate(children):
                down[child] = np.logaddexp(down[child], contributions[pos])
    return PassState(up=up, down=down, edges=edges, root=spn.root)


def weight_gradients(spn: Spn, evidence: Evidence) -> Dict[int, np.ndarray]:
    """
    dS(e)/dw_ij = dS(e)/dS_i(e) * S_j(e) for every sum node i, in the linear domain.
    """
    state = backward_pass(spn, evidence)
    return {i: np.exp(e[:, 0]) for i, e in state.edges.items()}


@dataclass(frozen=True)
class Marginals:
    """
    variables: discrete variable id -> P(X = t | e) over its values.
    hidden: sum node id -> P(Y_i = j | e) over its children, in child order.
    """

    variables: Dict[int, np.ndarray]
    hidden: Dict[int, np.ndarray]
    log_evidence: float


def _normalize_log(values: np.ndarray) -> Optional[np.ndarray]:
    with np.errstate(divide="ignore", invalid="ignore"):
        total = logsumexp(values)
    if not np.isfinite(total):
        return None
    return np.exp(values - total)


def marginals(spn: Spn, evidence: Evidence) -> Marginals:
    """
    Marginals of all variables and of the hidden sum-node variables by
    differentiation. P(X_s = t | e) is proportional to dS/d[X_s = t];
    P(Y_i = j | e) to w_ij * S_j(e) * dS/dS_i(e). Observed variables get a
    point mass on their value.
    """
    state = backward_pass(spn, evidence)
    log_s = float(state.log_evidence[0])
    if log_s == -np.inf:
        raise ZeroEvidenceError("Cannot condition on evidence with S(e) = 0")

    variables = spn.variables
    per_value: Dict[Tuple[int, int], float] = {}
    for i, node in enumerate(spn.nodes):
        if isinstance(node, IndicatorLeaf):
            key = (node.var, node.value)
            per_value[key] = float(np.logaddexp(per_value.get(key, -np.inf), state.down[i, 0]))

    result_vars: Dict[int, np.ndarray] = {}
    used = {var for var, _ in per_value}
    for var in sorted(used):
        arity = variables.arity(var)
        if evidence.observed(var):
            point = np.zeros(arity)
            point[int(evidence.values[var])] = 1.0
            result_vars[var] = point
            continue
        logs = np.array([per_value.get((var, t), -np.inf) for t in range(arity)])
        probs = _normalize_log(logs)
        if probs is not None:
            result_vars[var] = probs

    hidden: Dict[int, np.ndarray] = {}
    by_node = {node: (children, log_w) for node, is_sum, children, log_w in spn.arrays.internal if is_sum}
    for i, edge in state.edges.items():
        children, log_w = by_node[i]
        probs = _normalize_log(log_w + edge[:, 0])
        if probs is None:
            # node sits on no active path: fall back to its local posterior
            probs = _normalize_log(log_w + state.up[children, 0])
        if probs is None:
            probs = _normalize_log(log_w)
        if probs is not None:
            hidden[i] = probs
    return Marginals(variables=result_vars, hidden=hidden, log_evidence=log_s)


# ---------------------------------------------------------------------------
# MPE
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MpeResult:
    """
    state: per variable, the observed or assigned value (None if no selected
    leaf covers an unobserved variable).
    hidden: chosen child id for every sum node reached by the downward selection.
    """

    state: Tuple[Optional[float], ...]
    hidden: Dict[int, int]
    log_score: float

    def as_evidence(self) -> Evidence:
        return Evidence(self.state)


def _select(spn: Spn, up: np.ndarray, x: np.ndarray) -> Tuple[List[Optional[float]], Dict[int, int], float]:
    """
    Downward selection for one instance: the highest-valued child of every
    reached sum node (ties to the lowest child id), all children of products.
    """
    state: List[Optional[float]] = [
        None if math.isnan(v) else (v if spn.variables.is_continuous(var) else int(v))
        for var, v in enumerate(x.tolist())
    ]
    hidden: Dict[int, int] = {}
    score = 0.0
    stack = [spn.root]
    visited = set()
    while stack:
        i = stack.pop()
        if i in visited:
            continue
        visited.add(i)
        node = spn.nodes[i]
        if isinstance(node, SumNode):
            children = np.asarray(node.children)
            with np.errstate(divide="ignore"):
                terms = np.log(np.asarray(node.weights)) + up[children]
            best = terms.max()
            chosen = int(children[terms == best].min())
            hidden[i] = chosen
            score += math.log(node.weights[node.children.index(chosen)])
            stack.append(chosen)
        elif isinstance(node, ProductNode):
            stack.extend(node.children)
        elif isinstance(node, IndicatorLeaf):
            if state[node.var] is None:
                state[node.var] = node.value
            score += float(up[i])
        elif isinstance(node, GaussianLeaf):
            if state[node.var] is None:
                state[node.var] = node.mean
            score += float(up[i])
    return state, hidden, score


def mpe_batch(spn: Spn, data: EvidenceBatch, mode: MpeMode = MpeMode.SUM_UP_MAX_DOWN,
              require_valid: bool = True) -> List[Optional[MpeResult]]:
    """
    MPE for every instance of a batch; instances with S(e) = 0 yield None.
    """
    _require_valid(spn, require_valid)
    mode = MpeMode(mode)
    x = evidence_matrix(spn.variables, data)
    up = log_values(spn, x, maximize=mode is MpeMode.MAX_MAX)
    results: List[Optional[MpeResult]] = []
    for b in range(x.shape[0]):
        root_value = up[spn.root, b]
        if root_value == -np.inf:
            results.append(None)
            continue
        state, hidden, score = _select(spn, up[:, b], x[b])
        log_score = float(root_value) if mode is MpeMode.MAX_MAX else score
        results.append(MpeResult(state=tuple(state), hidden=hidden, log_score=log_score))
    return results


def mpe(spn: Spn, evidence: Evidence, mode: MpeMode = MpeMode.SUM_UP_MAX_DOWN,
        require_valid: bool = True) -> MpeResult:
    """
    MaxMax: weighted maxima on the upward pass, argmax traceback downward.
    SumUpMaxDown: ordinary sums upward, argmax_j w_ij * S_j(e) downward.
    Observed variables keep their values; an unobserved Gaussian variable is
    set to the selected component's mean.
    """
    result = mpe_batch(spn, evidence, mode, require_valid)[0]
    if result is None:
        raise ZeroEvidenceError("MPE undefined: evidence has zero probability")
    return result
