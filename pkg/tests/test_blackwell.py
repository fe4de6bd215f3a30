"""Blackwell coarsening decisions on the worked pairs and random instances.

Randomized suites are construct-then-check: a witness (or a planted
relabelling) is built first and the decision procedure must find it, so
soundness and completeness are tested independently of each other.
"""

from fractions import Fraction as F

import pytest

from lcgm_kit import (
    EXACT,
    LCGM,
    DomainMismatch,
    FiniteDistribution,
    PreconditionFailed,
    StochasticKernel,
    compose,
    float_mode,
    pushforward,
)
from lcgm_kit.blackwell import (
    TransitionWitness,
    blackwell_relation,
    check_lemma1_instance,
    find_coarsening_witness,
    is_feature_equivalent,
    is_measure_separating,
    verify_coarsening,
)
from lcgm_kit.util import derive_rng
from lcgm_kit.worked_examples import garbling_pair, garbling_witness, incomparable_pair

from helpers import random_exact_dist, random_exact_kernel


# -- feature equivalence -------------------------------------------------------


def test_worked_pair_feature_equivalent():
    M, M2 = garbling_pair()
    assert is_feature_equivalent(M, M2)


def test_model_feature_equivalent_to_itself():
    M, _ = garbling_pair()
    assert is_feature_equivalent(M, M)


def test_perturbed_concept_distribution_breaks_equivalence():
    M, M2 = garbling_pair()
    bumped = FiniteDistribution(("a", "b"), [F(3, 4) + F(1, 10), F(1, 4) - F(1, 10)])
    assert not is_feature_equivalent(LCGM(bumped, M.mixing), M2)


def test_feature_equivalence_requires_shared_feature_space():
    M, _ = garbling_pair()
    other = LCGM(
        FiniteDistribution(("a", "b"), [F(1, 2), F(1, 2)]),
        StochasticKernel.identity(("a", "b")),
    )
    with pytest.raises(DomainMismatch):
        is_feature_equivalent(M, other)


# -- witness search and verification ---------------------------------------------


def test_worked_pair_witness_found_and_verifies():
    M, M2 = garbling_pair()
    T = find_coarsening_witness(M, M2)
    assert T is not None
    assert verify_coarsening(M, M2, T)


def test_published_witness_verifies():
    M, M2 = garbling_pair()
    assert verify_coarsening(M, M2, garbling_witness())


def test_column_swapped_witness_fails():
    M, M2 = garbling_pair()
    swapped = TransitionWitness(
        StochasticKernel(("a", "b"), ("c", "d"), [[F(0), F(2, 3)], [F(1), F(1, 3)]])
    )
    assert not verify_coarsening(M, M2, swapped)


def test_self_witness_identity():
    M, _ = garbling_pair()
    T = find_coarsening_witness(M, M)
    assert T is not None
    assert verify_coarsening(M, M, T)
    ident = TransitionWitness(StochasticKernel.identity(("a", "b")))
    assert verify_coarsening(M, M, ident)


def test_incomparable_pair_has_no_witness_either_way():
    A, B = incomparable_pair()
    assert find_coarsening_witness(A, B) is None
    assert find_coarsening_witness(B, A) is None


def test_verify_confirms_feature_equality_consequence():
    M, M2 = garbling_pair()
    assert verify_coarsening(M, M2, garbling_witness())
    P = pushforward(M.mixing, M.concept_dist)
    P2 = pushforward(M2.mixing, M2.concept_dist)
    assert P == P2


# -- verdicts --------------------------------------------------------------------


def test_worked_pair_verdict_coarser_only():
    M, M2 = garbling_pair()
    verdict = blackwell_relation(M, M2)
    assert verdict.relation == "coarser_only"
    assert verdict.feature_equivalent
    assert verdict.forward is not None and verdict.backward is None


def test_worked_pair_reversed_verdict_finer_only():
    M, M2 = garbling_pair()
    verdict = blackwell_relation(M2, M)
    assert verdict.relation == "finer_only"


def test_incomparable_pair_verdict():
    A, B = incomparable_pair()
    verdict = blackwell_relation(A, B)
    assert verdict.relation == "incomparable"
    assert verdict.feature_equivalent


def test_self_verdict_equivalent():
    M, _ = garbling_pair()
    verdict = blackwell_relation(M, M)
    assert verdict.relation == "equivalent"


# -- measure separation and the refinement-from-coarsening lemma ------------------


def test_measure_separating_full_rank_and_duplicate_columns():
    assert is_measure_separating(StochasticKernel.identity(("a", "b")))
    dup = StochasticKernel(
        ("a", "b"), ("u", "v"), [[F(1, 2), F(1, 2)], [F(1, 2), F(1, 2)]]
    )
    assert not is_measure_separating(dup)


def test_lemma_holds_on_worked_pair():
    M, M2 = garbling_pair()
    assert check_lemma1_instance(M, M2, garbling_witness())


def test_lemma_identity_instance():
    M, _ = garbling_pair()
    assert check_lemma1_instance(M, M, TransitionWitness(StochasticKernel.identity(("a", "b"))))


def test_lemma_preconditions_reported_by_name():
    M, M2 = garbling_pair()
    dup_kernel = StochasticKernel(
        ("c", "d"), ("u", "v"), [[F(1, 2), F(1, 2)], [F(1, 2), F(1, 2)]]
    )
    broken = LCGM(M2.concept_dist, dup_kernel)
    with pytest.raises(PreconditionFailed) as err:
        check_lemma1_instance(M, broken, garbling_witness())
    assert any("measure-separating" in f for f in err.value.failed)


def test_lemma_randomized_construct_then_check():
    # plant K = K'T and Q' = TQ; the refinement conclusion must follow
    rng = derive_rng(1000, 0x1E4)
    C = ("a", "b", "c")
    C2 = ("x", "y", "z")
    Z = ("u", "v", "w", "t")
    checked = 0
    for _ in range(1000):
        K2 = random_exact_kernel(rng, C2, Z)
        if not is_measure_separating(K2):
            continue
        T = random_exact_kernel(rng, C, C2)
        Q = random_exact_dist(rng, C)
        K = compose(K2, T)
        Q2 = pushforward(T, Q)
        M = LCGM(Q, K)
        M2 = LCGM(Q2, K2)
        assert check_lemma1_instance(M, M2, TransitionWitness(T))
        checked += 1
    assert checked >= 990  # random kernels are almost always full rank


# -- soundness, completeness, transitivity -----------------------------------------


def test_planted_witness_always_recovered():
    rng = derive_rng(77, 0x50)
    C = ("a", "b", "c")
    C2 = ("x", "y")
    Z = ("u", "v", "w")
    for _ in range(50):
        K2 = random_exact_kernel(rng, C2, Z)
        T = random_exact_kernel(rng, C, C2)
        Q = random_exact_dist(rng, C)
        M = LCGM(Q, compose(K2, T))
        M2 = LCGM(pushforward(T, Q), K2)
        found = find_coarsening_witness(M, M2)
        assert found is not None
        assert verify_coarsening(M, M2, found)


def test_coarsening_transitivity_via_composed_witnesses():
    rng = derive_rng(78, 0x51)
    C = ("a", "b", "c")
    C2 = ("x", "y", "z")
    C3 = ("p", "q")
    Z = ("u", "v", "w")
    for _ in range(25):
        K3 = random_exact_kernel(rng, C3, Z)
        T2 = random_exact_kernel(rng, C2, C3)
        T1 = random_exact_kernel(rng, C, C2)
        Q = random_exact_dist(rng, C)
        K2 = compose(K3, T2)
        K1 = compose(K2, T1)
        M1 = LCGM(Q, K1)
        M2 = LCGM(pushforward(T1, Q), K2)
        M3 = LCGM(pushforward(T2, pushforward(T1, Q)), K3)
        assert verify_coarsening(M1, M2, TransitionWitness(T1))
        assert verify_coarsening(M2, M3, TransitionWitness(T2))
        assert verify_coarsening(M1, M3, TransitionWitness(compose(T2, T1)))


def _planted_dirac_pair(rng):
    m = int(rng.integers(2, 5))
    nz = m + int(rng.integers(0, 3))
    C = tuple(f"c{i}" for i in range(m))
    C2 = tuple(f"d{i}" for i in range(m))
    Z = tuple(f"z{i}" for i in range(nz))
    z_idx = list(rng.permutation(nz)[:m])
    gp = {C2[i]: Z[z_idx[i]] for i in range(m)}
    perm = list(rng.permutation(m))
    tau = {C[i]: C2[perm[i]] for i in range(m)}
    g = {c: gp[tau[c]] for c in C}
    Q = random_exact_dist(rng, C)
    Q2 = pushforward(StochasticKernel.dirac(tau, C, C2), Q)
    return (
        LCGM(Q, StochasticKernel.dirac(g, C, Z)),
        LCGM(Q2, StochasticKernel.dirac(gp, C2, Z)),
    )


def test_feature_equivalent_dirac_pairs_are_blackwell_equivalent():
    rng = derive_rng(79, 0x52)
    for _ in range(50):
        M, M2 = _planted_dirac_pair(rng)
        assert is_feature_equivalent(M, M2)
        assert blackwell_relation(M, M2).relation == "equivalent"


# -- float mode --------------------------------------------------------------------


def test_float_mode_verdict_is_flagged_heuristic():
    M, M2 = garbling_pair()
    jitter = 2e-12
    Qf = FiniteDistribution(("a", "b"), [0.75 + jitter, 0.25 - jitter])
    Kf = StochasticKernel(
        ("a", "b"), ("u", "v"), [[2 / 3, 0.0], [1 / 3, 1.0]]
    )
    Mf = LCGM(Qf, Kf)
    M2f = LCGM(
        FiniteDistribution(("c", "d"), [0.5, 0.5]),
        StochasticKernel(("c", "d"), ("u", "v"), [[1.0, 0.0], [0.0, 1.0]]),
    )
    mode = float_mode(1e-9)
    verdict = blackwell_relation(Mf, M2f, mode)
    assert verdict.heuristic
    assert verdict.relation == "coarser_only"
    assert verdict.feature_equivalent


def test_exact_search_rejects_float_models():
    M, M2 = garbling_pair()
    Mf = LCGM(
        FiniteDistribution(("a", "b"), [0.75, 0.25]),
        StochasticKernel(("a", "b"), ("u", "v"), [[2 / 3, 0.0], [1 / 3, 1.0]]),
    )
    with pytest.raises(PreconditionFailed):
        find_coarsening_witness(Mf, M2)
