#!/usr/bin/env pytest
"""
tests/test_oracle.py — Expansion, enumeration and fixture generators.
"""
import math

import numpy as np
import pytest

from spn_toolkit.exceptions.spn_errors import EvidenceError, InputError, OracleCapacityError
from spn_toolkit.graph import SpnBuilder, VariableTable
from spn_toolkit.inference import Evidence, evaluate
from spn_toolkit.oracle import (
    brute_mpe,
    brute_phi,
    brute_phi_batch,
    build_even_parity,
    build_two_variable_mixture,
    enumerate_evidence,
    expand,
    random_invalid_spn,
    random_valid_spn,
    sample_states,
)


def test_mixture_expansion():
    expansion = expand(build_two_variable_mixture())
    assert len(expansion) == 12
    assert expansion.contradictory == ()
    collected = expansion.collect()
    assert len(collected) == 4
    assert collected.coefficient_of({0: 1, 1: 1}) == pytest.approx(0.168, abs=1e-12)
    assert sum(m.coefficient for m in collected.monomials) == pytest.approx(1.0, abs=1e-12)


def test_expansion_evaluates_like_the_network():
    spn = build_two_variable_mixture()
    expansion = expand(spn)
    for row in enumerate_evidence(spn.variables):
        e = Evidence.from_array(row)
        assert expansion.evaluate(e) == pytest.approx(math.exp(evaluate(spn, e)), abs=1e-12)


def test_even_parity_expansion():
    expansion = expand(build_even_parity(3)).collect()
    assert len(expansion) == 4
    for m in expansion.monomials:
        assert m.coefficient == pytest.approx(0.25)
        assert sum(m.assignment().values()) % 2 == 0


def test_inconsistent_expansion_has_contradictory_terms():
    b = SpnBuilder(VariableTable.boolean(1))
    x, nx = b.indicator(0, 1), b.indicator(0, 0)
    b.product([x, nx])
    expansion = expand(b.build())
    assert len(expansion.contradictory) == 1
    assert brute_phi(b.build(), Evidence.marginal(1)) == 0.0


def test_expand_rejects_continuous_leaves():
    b = SpnBuilder(VariableTable.continuous(1))
    b.gaussian(0, 0.0)
    with pytest.raises(InputError):
        expand(b.build())


def test_capacity_caps_raise():
    spn = build_two_variable_mixture()
    with pytest.raises(OracleCapacityError):
        expand(spn, max_terms=3)
    with pytest.raises(OracleCapacityError):
        brute_phi(build_even_parity(4), Evidence.marginal(4), max_states=8)


def test_brute_phi_needs_observed_continuous_variables():
    b = SpnBuilder(VariableTable.continuous(1))
    b.gaussian(0, 0.0)
    with pytest.raises(EvidenceError):
        brute_phi(b.build(), Evidence.marginal(1))
    assert brute_phi(b.build(), Evidence.of(0.0)) == pytest.approx(1 / math.sqrt(2 * math.pi))


def test_brute_phi_mixture():
    spn = build_two_variable_mixture()
    assert brute_phi(spn, Evidence.marginal(2)) == pytest.approx(1.0)
    assert brute_phi(spn, Evidence.of(1, None)) == pytest.approx(0.69)


def test_brute_phi_batch_matches_single_rows():
    for spn in (build_two_variable_mixture(), random_invalid_spn(2, 3, "inconsistent", depth=2)):
        rows = enumerate_evidence(spn.variables)
        batch = brute_phi_batch(spn, rows)
        assert batch.shape == (len(rows),)
        assert batch == pytest.approx([brute_phi(spn, Evidence.from_array(row)) for row in rows], rel=1e-9)
    assert brute_phi_batch(build_two_variable_mixture(), [Evidence.of(1, None)]) == pytest.approx([0.69])


def test_brute_mpe_mixture():
    best, monomial = brute_mpe(build_two_variable_mixture(), Evidence.marginal(2))
    assert best == pytest.approx(0.216)
    assert monomial.assignment() == {0: 1, 1: 0}


def test_enumerate_evidence_rows():
    rows = enumerate_evidence(VariableTable.boolean(2))
    assert rows.shape == (9, 2)
    assert np.isnan(rows[0]).all()
    assert np.isnan(rows).sum() == 6


@pytest.mark.parametrize("seed", range(5))
def test_random_generators_respect_their_kind(seed):
    assert random_valid_spn(seed, 4).validity.decomposable
    consistent = random_valid_spn(seed, 4, decomposable=False)
    assert consistent.validity.valid
    inconsistent = random_invalid_spn(seed, 3, "inconsistent")
    assert inconsistent.validity.complete and not inconsistent.validity.consistent
    incomplete = random_invalid_spn(seed, 3, "incomplete")
    assert incomplete.validity.consistent and not incomplete.validity.complete


def test_random_generators_are_seeded():
    assert random_valid_spn(7, 4) == random_valid_spn(7, 4)


def test_random_invalid_rejects_unknown_kind():
    with pytest.raises(InputError):
        random_invalid_spn(0, 3, "cyclic")


def test_sample_states_follow_the_model():
    samples = sample_states(build_two_variable_mixture(), 20_000, seed=3)
    assert samples.shape == (20_000, 2)
    assert samples[:, 0].mean() == pytest.approx(0.69, abs=0.02)
    both = np.mean((samples[:, 0] == 1) & (samples[:, 1] == 1))
    assert both == pytest.approx(0.168, abs=0.02)
