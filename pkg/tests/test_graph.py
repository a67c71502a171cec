#!/usr/bin/env pytest
"""
tests/test_graph.py — Node table construction, scopes, validity, weights.
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spn_toolkit import graph
from spn_toolkit.exceptions.spn_errors import DegenerateNodeError, MalformedGraphError
from spn_toolkit.graph import (
    GaussianLeaf,
    IndicatorLeaf,
    ProductNode,
    Spn,
    SpnBuilder,
    SumNode,
    VariableTable,
    ViolationKind,
    check_validity,
    compute_scopes,
    decomposition_depth,
    normalize_weights,
    uniform_weights,
)
from spn_toolkit.oracle import build_two_variable_mixture, random_invalid_spn, random_valid_spn


def test_mixture_is_valid_and_decomposable():
    spn = build_two_variable_mixture()
    report = spn.validity
    assert report.valid
    assert report.decomposable
    assert report.violations == ()
    assert report.summary() == "complete=true consistent=true decomposable=true"


def test_scopes_of_mixture():
    spn = build_two_variable_mixture()
    scopes = compute_scopes(spn)
    assert scopes[spn.root] == frozenset({0, 1})
    # sums A and B mix the X1 indicators
    assert scopes[4] == frozenset({0})
    assert scopes[6] == frozenset({1})


def test_builder_assigns_ids_in_insertion_order():
    b = SpnBuilder(VariableTable.boolean(1))
    assert b.indicator(0, 1) == 0
    assert b.indicator(0, 0) == 1
    assert b.sum([0, 1]) == 2
    spn = b.build()
    assert spn.root == 2
    assert spn.nodes[2].weights == (0.5, 0.5)
    assert spn.num_edges == 2


@pytest.mark.parametrize("nodes, root", [
    ((IndicatorLeaf(0, 1), SumNode((2,), (1.0,)), IndicatorLeaf(0, 0)), 1),
    ((IndicatorLeaf(0, 1), IndicatorLeaf(0, 0), SumNode((0, 1), (0.5, -0.5))), 2),
    ((IndicatorLeaf(0, 1), SumNode((0, 0), (0.5, 0.5))), 1),
    ((IndicatorLeaf(0, 2),), 0),
    ((IndicatorLeaf(0, 1), ProductNode(())), 1),
    ((IndicatorLeaf(0, 1), SumNode((0,), (0.5, 0.5))), 1),
    ((GaussianLeaf(0, 0.0),), 0),
    ((IndicatorLeaf(0, 1),), 3),
])
def test_malformed_tables_raise(nodes, root):
    with pytest.raises(MalformedGraphError):
        Spn(nodes, root, VariableTable.boolean(1))


def test_variable_table_rejects_arity_one():
    with pytest.raises(MalformedGraphError):
        VariableTable((1,))


def test_incomplete_sum_is_reported():
    b = SpnBuilder(VariableTable.boolean(2))
    x1 = b.indicator(0, 1)
    x2 = b.indicator(1, 1)
    root = b.sum([x1, x2])
    report = b.build(root).validity
    assert not report.complete
    assert report.consistent
    assert not report.valid
    assert report.violations[0].kind is ViolationKind.INCOMPLETE
    assert report.violations[0].node == root


def test_product_of_opposite_indicators_is_inconsistent():
    b = SpnBuilder(VariableTable.boolean(1))
    x, nx = b.indicator(0, 1), b.indicator(0, 0)
    b.product([x, nx])
    report = b.build().validity
    assert report.complete
    assert not report.consistent
    assert not report.decomposable
    kinds = {v.kind for v in report.violations}
    assert kinds == {ViolationKind.INCONSISTENT, ViolationKind.NOT_DECOMPOSABLE}


def test_repeated_indicator_is_consistent_but_not_decomposable():
    b = SpnBuilder(VariableTable.boolean(2))
    x1, x2 = b.indicator(0, 1), b.indicator(1, 1)
    left = b.product([x1, x2])
    b.product([left, x1])
    report = b.build().validity
    assert report.consistent
    assert not report.decomposable
    assert report.valid


def test_three_valued_variable_conflict():
    b = SpnBuilder(VariableTable((3,)))
    v0, v2 = b.indicator(0, 0), b.indicator(0, 2)
    b.product([v0, v2])
    assert not b.build().validity.consistent


def test_shared_continuous_variable_is_inconsistent():
    b = SpnBuilder(VariableTable.continuous(1))
    g1, g2 = b.gaussian(0, 0.0), b.gaussian(0, 1.0)
    b.product([g1, g2])
    assert not b.build().validity.consistent


def test_normalize_weights_preserves_ratios():
    b = SpnBuilder(VariableTable.boolean(1))
    x, nx = b.indicator(0, 1), b.indicator(0, 0)
    b.sum([x, nx], [2.0, 6.0])
    spn = normalize_weights(b.build())
    assert spn.nodes[spn.root].weights == pytest.approx((0.25, 0.75))


def test_normalize_all_zero_weights_names_node():
    b = SpnBuilder(VariableTable.boolean(1))
    x, nx = b.indicator(0, 1), b.indicator(0, 0)
    root = b.sum([x, nx], [0.0, 0.0])
    with pytest.raises(DegenerateNodeError) as excinfo:
        normalize_weights(b.build())
    assert excinfo.value.node == root


def test_uniform_weights_and_with_weights():
    spn = uniform_weights(build_two_variable_mixture())
    assert spn.nodes[spn.root].weights == pytest.approx((1 / 3, 1 / 3, 1 / 3))
    updated = spn.with_weights({spn.root: [1.0, 0.0, 0.0]})
    assert updated.nodes[updated.root].weights == (1.0, 0.0, 0.0)
    with pytest.raises(MalformedGraphError):
        spn.with_weights({0: [1.0]})


def test_reachable_skips_detached_nodes():
    b = SpnBuilder(VariableTable.boolean(1))
    x, nx = b.indicator(0, 1), b.indicator(0, 0)
    b.sum([x, nx])
    spn = b.build(root=x)
    assert spn.reachable() == {x}


def test_decomposition_depth():
    assert decomposition_depth(build_two_variable_mixture()) == 1
    b = SpnBuilder(VariableTable.boolean(1))
    b.indicator(0, 1)
    assert decomposition_depth(b.build()) == 0


SEEDS = st.integers(0, 100_000)


def random_network(seed, d, family):
    if family == "decomposable":
        return random_valid_spn(seed, d, depth=2)
    if family == "consistent":
        return random_valid_spn(seed, d, depth=2, decomposable=False)
    return random_invalid_spn(seed, d, family, depth=2)


@settings(max_examples=50, deadline=None)
@given(seed=SEEDS, d=st.integers(2, 6),
       family=st.sampled_from(["decomposable", "consistent", "inconsistent", "incomplete"]))
def test_validity_check_is_pure(seed, d, family):
    spn = random_network(seed, d, family)
    assert check_validity(spn) == check_validity(spn)
    assert check_validity(spn) == spn.validity


@settings(max_examples=100, deadline=None)
@given(seed=SEEDS, d=st.integers(1, 6), family=st.sampled_from(["decomposable", "consistent", "inconsistent"]))
def test_decomposable_implies_consistent(seed, d, family):
    if family == "inconsistent" and d < 2:
        d = 2
    report = random_network(seed, d, family).validity
    if report.decomposable:
        assert report.consistent
    if family == "decomposable":
        assert report.valid and report.decomposable


@settings(max_examples=50, deadline=None)
@given(seed=SEEDS, d=st.integers(1, 6), decomposable=st.booleans())
def test_normalized_weights_sum_to_one_and_keep_the_best_child(seed, d, decomposable):
    raw = random_valid_spn(seed, d, depth=2, decomposable=decomposable, normalized=False)
    spn = normalize_weights(raw)
    for i in spn.sum_nodes:
        assert abs(sum(spn.nodes[i].weights) - 1.0) <= 1e-12
        assert np.argmax(spn.nodes[i].weights) == np.argmax(raw.nodes[i].weights)
    assert spn.validity == raw.validity


def test_with_weights_keeps_the_validity_report(monkeypatch):
    spn = build_two_variable_mixture()
    report = spn.validity
    calls = []
    monkeypatch.setattr(graph, "check_validity", lambda *args: calls.append(args))
    updated = normalize_weights(uniform_weights(spn.with_weights({spn.root: [2.0, 1.0, 1.0]})))
    assert updated.validity is report
    assert calls == []


def test_with_weights_leaves_an_unchecked_report_unchecked(monkeypatch):
    spn = build_two_variable_mixture()
    calls = []
    real = graph.check_validity

    def counting(*args):
        calls.append(args)
        return real(*args)

    monkeypatch.setattr(graph, "check_validity", counting)
    updated = uniform_weights(spn)
    assert calls == []
    assert updated.validity.valid
    assert len(calls) == 1
