import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from persuade.belief_core import (
    ConditionalBeliefFamily,
    FiniteSupportDistribution,
    PreconditionError,
    Prior,
    ValidationError,
    binary_belief,
    posterior_from_signals,
)
from persuade.feasibility import (
    build_information_structure,
    check_family,
    check_one_state_marginal,
    check_single_receiver,
    complete_one_state_marginal,
    marginal,
    max_disagreement,
    one_state_integrals,
    symmetric_family,
)
from conftest import fig2_family, random_family

HALF = Prior.binary(0.5)


def test_fig2_feasible():
    assert check_family(fig2_family(), HALF).feasible


def test_fig2_receiver_marginal():
    low, high = marginal(fig2_family(), 0)
    assert low.weight_of(binary_belief(1 / 3)) == pytest.approx(0.5)
    assert low.weight_of(binary_belief(1.0)) == pytest.approx(0.5)
    assert high.atoms == (binary_belief(1 / 3),)


def test_certainty_contradiction_infeasible():
    # a receiver certain of the low state while the state is high
    fam = ConditionalBeliefFamily.from_binary([[((1.0, 1.0), 1.0)], [((1.0, 0.0), 1.0)]])
    rep = check_family(fam, HALF)
    assert not rep.feasible
    assert rep.max_violation > 0.5
    assert "receiver 0" in rep.summary()


def test_marginal_index_error():
    with pytest.raises(IndexError):
        marginal(fig2_family(), 2)


@pytest.mark.parametrize("r", [0.6, 0.75, 0.9])
def test_disagreement_cap(r):
    assert max_disagreement(r) == pytest.approx(1 - r, abs=1e-9)


def test_maximal_disagreement_family_binds():
    r = 0.9
    assert check_family(symmetric_family(r, 1 - r), HALF).feasible
    with pytest.raises(ValidationError):
        symmetric_family(r, 1 - r + 0.05)


def test_shifted_disagreement_breaks_marginals():
    # move 0.05 from (r, r) onto each off-diagonal profile in both states
    r = 0.9
    B = binary_belief
    lo, hi = B(1 - r), B(r)
    low = FiniteSupportDistribution(((hi, hi), (hi, lo), (lo, hi)), (0.7, 0.15, 0.15))
    high = FiniteSupportDistribution(((lo, lo), (hi, lo), (lo, hi)), (0.7, 0.15, 0.15))
    rep = check_family(ConditionalBeliefFamily((low, high)), HALF)
    assert not rep.feasible
    assert rep.max_violation == pytest.approx(0.05)


def test_single_receiver_length_mismatch():
    with pytest.raises(ValidationError):
        check_single_receiver([FiniteSupportDistribution.point(binary_belief(0.5))], HALF)


def test_morale_marginal_binding():
    lam = FiniteSupportDistribution((binary_belief(1.0), binary_belief(1 / 3)), (0.5, 0.5))
    rep = check_one_state_marginal(lam, HALF, 0)
    assert rep.feasible
    assert rep.details["integrals"][1] == pytest.approx(1.0)
    assert rep.details["binding"][1]


def test_one_state_zero_denominator():
    lam = FiniteSupportDistribution((binary_belief(0.0),), (1.0,))
    assert one_state_integrals(lam, HALF, 0)[1] == np.inf
    assert not check_one_state_marginal(lam, HALF, 0).feasible


def test_complete_marginal_adds_vertex():
    lam = FiniteSupportDistribution((binary_belief(0.8),), (1.0,))
    low, high = complete_one_state_marginal(lam, HALF, 0)
    assert low.weight_of(binary_belief(0.8)) == pytest.approx(1.0)
    # unconditional mass 0.625 at 0.8, the rest at the high-state vertex
    assert high.weight_of(binary_belief(0.0)) == pytest.approx(0.75)
    assert high.weight_of(binary_belief(0.8)) == pytest.approx(0.25)


def test_build_structure_rejects_infeasible():
    fam = ConditionalBeliefFamily.from_binary([[((1.0, 1.0), 1.0)], [((1.0, 0.0), 1.0)]])
    with pytest.raises(PreconditionError):
        build_information_structure(fam, HALF)


def test_fig2_structure_picks_one_receiver():
    info = build_information_structure(fig2_family(), HALF)
    assert [len(s) for s in info.signal_sets] == [2, 2]
    low = dict(info.kernel[0])
    assert sorted(low.values()) == pytest.approx([0.5, 0.5])
    assert all(sum(sig) == 1 for sig in low)            # exactly one receiver gets the rarer signal
    assert len(info.kernel[1]) == 1


@given(st.integers(0, 2**31 - 1), st.sampled_from([2, 3]), st.sampled_from([1, 2, 3]))
@settings(max_examples=60, deadline=None)
def test_roundtrip_structure(seed, S, n):
    rng = np.random.default_rng(seed)
    fam, prior = random_family(rng, n, S)
    assert check_family(fam, prior).feasible
    info = build_information_structure(fam, prior)
    again = posterior_from_signals(info, prior)
    assert fam.max_distance(again) <= 1e-9
