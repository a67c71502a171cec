#!/usr/bin/env python3
"""
spn_toolkit/learning.py — Weight learning: online hard EM, soft EM, gradient ascent, pruning.

Training starts from zero counts (uniform smoothed weights), processes fixed
mini-batches in a seeded order each epoch, and stops when the average training
log-likelihood improves by less than the threshold. A batch's previous
statistics are retracted before its new ones are added, so counts always
describe the current assignment of every instance. Edges with zero weight (or
failing the L0 criterion under hard EM) are pruned at the end.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from spn_toolkit.exceptions.spn_errors import (
    ConfigError,
    DegenerateModelError,
    InputError,
    InvalidSpnError,
    TrainingDivergedError,
)
from spn_toolkit.graph import ProductNode, Spn, SumNode, uniform_weights
from spn_toolkit.inference import (
    Evidence,
    EvidenceBatch,
    MpeMode,
    backward_pass,
    evidence_matrix,
    log_likelihoods,
    mpe_batch,
)

logger = logging.getLogger(__name__)

Statistics = Dict[int, np.ndarray]


class TrainMode(str, Enum):
    HARD_EM = "hard-em"
    SOFT_EM = "soft-em"
    GRADIENT = "gradient"


@dataclass(frozen=True)
class TrainConfig:
    mode: TrainMode = TrainMode.HARD_EM
    learning_rate: float = 0.1
    batch_size: int = 50
    threshold: float = 0.1
    max_epochs: int = 50
    l0_penalty: float = 1.0
    l1_penalty: float = 0.0
    alpha: float = 1.0
    mpe_mode: MpeMode = MpeMode.SUM_UP_MAX_DOWN
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "mode", TrainMode(self.mode))
            object.__setattr__(self, "mpe_mode", MpeMode(self.mpe_mode))
        except ValueError as e:
            raise ConfigError(str(e))
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not self.threshold > 0:
            raise ConfigError("threshold must be > 0")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.l0_penalty < 0 or self.l1_penalty < 0 or self.alpha < 0:
            raise ConfigError("l0_penalty, l1_penalty and alpha must be >= 0")


@dataclass
class CountTable:
    """
    Accumulated count per sum edge, stored per sum node in child order.
    Derived weight: (count_ij + alpha) / (sum_j count_ij + alpha * |Ch(i)|).
    """

    counts: Dict[int, np.ndarray]
    children: Dict[int, Tuple[int, ...]]
    alpha: float = 1.0
    skipped: int = 0

    @classmethod
    def zeros(cls, spn: Spn, alpha: float = 1.0) -> "CountTable":
        children = {i: spn.nodes[i].children for i in spn.sum_nodes}
        return cls({i: np.zeros(len(c)) for i, c in children.items()}, children, alpha)

    def _position(self, node: int, child: int) -> int:
        return self.children[node].index(child)

    def count(self, node: int, child: int) -> float:
        return float(self.counts[node][self._position(node, child)])

    def increment(self, node: int, child: int, amount: float = 1.0) -> None:
        self.counts[node][self._position(node, child)] += amount

    def add(self, stats: Mapping[int, np.ndarray], sign: float = 1.0) -> "CountTable":
        for node, values in stats.items():
            # retraction may leave -1e-16 residues
            np.maximum(self.counts[node] + sign * values, 0.0, out=self.counts[node])
        return self

    def weights(self, node: int) -> np.ndarray:
        c = self.counts[node]
        total = c.sum() + self.alpha * len(c)
        if total <= 0:
            return np.full(len(c), 1.0 / len(c))
        return (c + self.alpha) / total

    def apply(self, spn: Spn) -> Spn:
        return spn.with_weights({i: self.weights(i) for i in self.counts})


# ---------------------------------------------------------------------------
# E-step statistics
# ---------------------------------------------------------------------------

def hard_em_statistics(spn: Spn, batch: EvidenceBatch,
                       mode: MpeMode = MpeMode.SUM_UP_MAX_DOWN) -> Tuple[Statistics, int]:
    """
    One unit per reached sum node, on the child the MPE selection picked.
    Returns the statistics and the number of zero-evidence instances skipped.
    """
    positions = {i: {c: p for p, c in enumerate(spn.nodes[i].children)} for i in spn.sum_nodes}
    stats: Statistics = {}
    skipped = 0
    for result in mpe_batch(spn, batch, mode):
        if result is None:
            skipped += 1
            continue
        for node, child in result.hidden.items():
            if node not in stats:
                stats[node] = np.zeros(len(positions[node]))
            stats[node][positions[node][child]] += 1.0
    return stats, skipped


def soft_em_statistics(spn: Spn, batch: EvidenceBatch) -> Tuple[Statistics, int]:
    """
    Expected edge usage w_ij * dS/dS_i * S_j / S per instance, summed over
    the batch. At the root this is P(Y_root = j | e).
    """
    state = backward_pass(spn, batch)
    root_ll = state.log_evidence
    ok = np.isfinite(root_ll)
    stats: Statistics = {}
    with np.errstate(divide="ignore"):
        for i, edge in state.edges.items():
            log_w = np.log(np.asarray(spn.nodes[i].weights))
            stats[i] = np.exp(log_w[:, None] + edge[:, ok] - root_ll[None, ok]).sum(axis=1)
    return stats, int((~ok).sum())


def log_likelihood_gradients(spn: Spn, batch: EvidenceBatch) -> Tuple[Statistics, int]:
    """
    d log S(x) / dw_ij = (dS/dS_i) S_j / S, summed over the batch instances
    with S(x) > 0. Returns the gradients and the number skipped.
    """
    state = backward_pass(spn, batch)
    root_ll = state.log_evidence
    ok = np.isfinite(root_ll)
    grads = {i: np.exp(edge[:, ok] - root_ll[None, ok]).sum(axis=1) for i, edge in state.edges.items()}
    return grads, int((~ok).sum())


def _warn_skipped(skipped: int, what: str) -> None:
    if skipped:
        logger.warning("Skipped %d zero-probability instance(s) during %s", skipped, what)


def hard_em_update(spn: Spn, counts: CountTable, instance: Evidence,
                   mode: MpeMode = MpeMode.SUM_UP_MAX_DOWN) -> CountTable:
    """
    Increment the count of the winning child of every sum node reached by
    the MPE selection; each increment has unit size whatever its depth.
    """
    stats, skipped = hard_em_statistics(spn, [instance], mode)
    counts.skipped += skipped
    _warn_skipped(skipped, "hard EM")
    return counts.add(stats)


def soft_em_update(spn: Spn, counts: CountTable, instance: Evidence) -> CountTable:
    stats, skipped = soft_em_statistics(spn, [instance])
    counts.skipped += skipped
    _warn_skipped(skipped, "soft EM")
    return counts.add(stats)


def _gradient_step(spn: Spn, batch: EvidenceBatch, learning_rate: float,
                   l1_penalty: float) -> Tuple[Spn, int]:
    grads, skipped = log_likelihood_gradients(spn, batch)
    n_ok = evidence_matrix(spn.variables, batch).shape[0] - skipped
    if n_ok == 0:
        return spn, skipped
    new_weights: Dict[int, np.ndarray] = {}
    for i, g in grads.items():
        w = np.asarray(spn.nodes[i].weights)
        g = g / n_ok
        # project onto the sum-to-one surface
        step = learning_rate * (g - g.mean()) - learning_rate * l1_penalty
        updated = np.maximum(w + step, 0.0)
        total = updated.sum()
        if total <= 0:
            logger.warning("Gradient step zeroed every weight of sum node %d; keeping its weights", i)
            continue
        new_weights[i] = updated / total
    return spn.with_weights(new_weights), skipped


def gradient_update(spn: Spn, batch: EvidenceBatch, learning_rate: float,
                    l1_penalty: float = 0.0) -> Spn:
    """
    One projected gradient-ascent step on the batch's mean log-likelihood,
    clamped at zero and renormalized per sum node.
    """
    updated, skipped = _gradient_step(spn, batch, learning_rate, l1_penalty)
    _warn_skipped(skipped, "gradient update")
    return updated


# ---------------------------------------------------------------------------
# Pruning
# ---------------------------------------------------------------------------

def _kept_edges(spn: Spn, counts: Optional[CountTable], l0_penalty: float) -> Dict[int, np.ndarray]:
    kept: Dict[int, np.ndarray] = {}
    for i in spn.sum_nodes:
        w = np.asarray(spn.nodes[i].weights)
        mask = w > 0
        if counts is not None and counts.counts[i].sum() > 0:
            c = counts.counts[i]
            if counts.alpha > 0:
                gain = c * np.log((c + counts.alpha) / counts.alpha)
            else:
                gain = np.where(c > 0, np.inf, 0.0)
            mask = (c > 0) & (gain >= l0_penalty)
            mask[int(np.argmax(c))] = True
        kept[i] = mask
    return kept


def prune_zero_weights(spn: Spn, counts: Optional[CountTable] = None, l0_penalty: float = 0.0) -> Spn:
    """
    Remove sum edges with zero weight and every node no longer reachable from
    the root; ids are compacted. With a CountTable, an edge is removed when
    its count is 0 or its contribution c * log((c + alpha) / alpha) is below
    l0_penalty (each node keeps its highest-count child), and the surviving
    weights are renormalized.
    """
    kept = _kept_edges(spn, counts, l0_penalty)

    reachable = {spn.root}
    for i in range(spn.root, -1, -1):
        if i not in reachable:
            continue
        node = spn.nodes[i]
        if isinstance(node, SumNode):
            children = [c for c, keep in zip(node.children, kept[i]) if keep]
            if not children:
                if i == spn.root:
                    raise DegenerateModelError("Pruning would delete the root's last child")
                raise DegenerateModelError(f"Pruning would leave sum node {i} without children")
            reachable.update(children)
        elif isinstance(node, ProductNode):
            reachable.update(node.children)

    order = sorted(reachable)
    new_id = {old: new for new, old in enumerate(order)}
    nodes = []
    for old in order:
        node = spn.nodes[old]
        if isinstance(node, SumNode):
            pairs = [(new_id[c], w) for c, w, keep in zip(node.children, node.weights, kept[old]) if keep]
            weights = [w for _, w in pairs]
            if counts is not None:
                total = sum(weights)
                weights = [w / total for w in weights]
            nodes.append(SumNode(tuple(c for c, _ in pairs), tuple(weights)))
        elif isinstance(node, ProductNode):
            nodes.append(ProductNode(tuple(new_id[c] for c in node.children)))
        else:
            nodes.append(node)
    pruned = Spn(tuple(nodes), new_id[spn.root], spn.variables)
    logger.debug("Pruned %d -> %d nodes, %d -> %d edges", len(spn), len(pruned), spn.num_edges, pruned.num_edges)
    return pruned


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    avg_ll: float
    seconds: float
    batch_seconds: Tuple[float, ...] = ()

    def line(self) -> str:
        return f"epoch={self.epoch} avg_ll={self.avg_ll:.6f} seconds={self.seconds:.3f}"


@dataclass(frozen=True)
class PruneStats:
    nodes_before: int
    nodes_after: int
    edges_before: int
    edges_after: int


@dataclass
class TrainingLog:
    initial_avg_ll: float = float("nan")
    epochs: List[EpochRecord] = field(default_factory=list)
    skipped: int = 0
    converged: bool = False
    prune: Optional[PruneStats] = None

    def lines(self) -> List[str]:
        return [record.line() for record in self.epochs]


def average_log_likelihood(spn: Spn, data: EvidenceBatch) -> float:
    """
    Mean log-likelihood over instances with non-zero probability
    (-inf when there are none). NaN propagates.
    """
    ll = log_likelihoods(spn, data)
    dropped = int(np.isneginf(ll).sum())
    if dropped:
        logger.warning("%d of %d instance(s) have zero probability; left out of the average log-likelihood",
                       dropped, ll.size)
    ll = ll[~np.isneginf(ll)]
    if ll.size == 0:
        return -math.inf
    return float(ll.mean())


def train(spn: Spn, data: EvidenceBatch, config: TrainConfig = TrainConfig()) -> Tuple[Spn, TrainingLog]:
    """
    Learn the weights of a valid SPN from data, then prune.
    Deterministic for a given config.seed.
    """
    x = evidence_matrix(spn.variables, data)
    if x.shape[0] == 0:
        raise InputError("Training set is empty")
    if not spn.validity.valid:
        raise InvalidSpnError(f"Cannot train an invalid SPN ({spn.validity.summary()})")

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(x.shape[0])
    batches = [order[s:s + config.batch_size] for s in range(0, x.shape[0], config.batch_size)]
    previous: List[Optional[Statistics]] = [None] * len(batches)

    counts = CountTable.zeros(spn, config.alpha)
    model = uniform_weights(spn) if config.mode is TrainMode.GRADIENT else counts.apply(spn)
    log = TrainingLog()
    avg = average_log_likelihood(model, x)
    log.initial_avg_ll = avg
    logger.info("Training %s on %d instances in %d batch(es); initial avg_ll=%.6f",
                config.mode.value, x.shape[0], len(batches), avg)

    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        batch_seconds = []
        for b in rng.permutation(len(batches)):
            batch_started = time.perf_counter()
            rows = x[batches[b]]
            if config.mode is TrainMode.GRADIENT:
                model, skipped = _gradient_step(model, rows, config.learning_rate, config.l1_penalty)
            else:
                if config.mode is TrainMode.HARD_EM:
                    stats, skipped = hard_em_statistics(model, rows, config.mpe_mode)
                else:
                    stats, skipped = soft_em_statistics(model, rows)
                if previous[b] is not None:
                    counts.add(previous[b], sign=-1.0)
                counts.add(stats)
                previous[b] = stats
                counts.skipped += skipped
                model = counts.apply(model)
            log.skipped += skipped
            _warn_skipped(skipped, f"epoch {epoch}")
            batch_seconds.append(time.perf_counter() - batch_started)

        new_avg = average_log_likelihood(model, x)
        if math.isnan(new_avg):
            raise TrainingDivergedError(f"Average log-likelihood became NaN in epoch {epoch}")
        record = EpochRecord(epoch, new_avg, time.perf_counter() - started, tuple(batch_seconds))
        log.epochs.append(record)
        logger.info(record.line())
        improvement = new_avg - avg
        avg = new_avg
        if improvement < config.threshold:
            log.converged = True
            break

    if config.mode is TrainMode.HARD_EM:
        pruned = prune_zero_weights(model, counts, config.l0_penalty)
    else:
        pruned = prune_zero_weights(model)
    log.prune = PruneStats(len(model), len(pruned), model.num_edges, pruned.num_edges)
    logger.info("Pruned model: %d -> %d nodes, %d -> %d edges",
                len(model), len(pruned), model.num_edges, pruned.num_edges)
    return pruned, log
