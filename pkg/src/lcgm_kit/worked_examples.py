"""Exact regression fixtures: the bundled worked examples.

Two hand-sized model pairs anchor the whole decision stack.  The
*garbling pair* is feature equivalent and one-directionally coarser, with
a known transition witness and known posteriors.  The *incomparable pair*
is feature equivalent yet admits no coarsening in either direction; the
unconstrained linear systems each have a unique solution with a negative
entry, which is exactly why the constrained searches must come back
infeasible.  Everything here runs in exact rational arithmetic; any
failure is a regression, not noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from importlib import resources

from .blackwell import (
    TransitionWitness,
    blackwell_relation,
    find_coarsening_witness,
    verify_coarsening,
)
from .kernel_algebra import (
    LCGM,
    FiniteDistribution,
    StochasticKernel,
    feature_distribution,
    posterior,
    pushforward,
)
from .lp_feasibility import solve_linear_system
from .model_io import model_from_json
from .transition_sets import (
    ConceptClassSpec,
    ConceptPredicate,
    GroupSpec,
    KernelClassSpec,
    KernelPredicate,
    TransitionMap,
    all_permutation_maps,
    certify_identifiability,
    valid_kernel_transitions,
)
from .util import derive_rng

F = Fraction


def load_fixture_model(name: str) -> LCGM:
    import json

    text = resources.files("lcgm_kit.fixtures").joinpath(name).read_text("utf-8")
    return model_from_json(json.loads(text))


def garbling_pair() -> tuple[LCGM, LCGM]:
    """The feature-equivalent pair with a one-directional coarsening."""
    return (
        load_fixture_model("garbling_coarse.json"),
        load_fixture_model("garbling_fine.json"),
    )


def incomparable_pair() -> tuple[LCGM, LCGM]:
    """The feature-equivalent pair with no coarsening in either direction."""
    return (
        load_fixture_model("incomparable_left.json"),
        load_fixture_model("incomparable_right.json"),
    )


def garbling_witness() -> TransitionWitness:
    """The published transition kernel for the garbling pair (rows c,d; cols a,b)."""
    return TransitionWitness(
        StochasticKernel(
            ("a", "b"), ("c", "d"), [[F(2, 3), F(0)], [F(1, 3), F(1)]]
        )
    )


def finite_mixture_class(d: int, seed: int = 7) -> tuple[ConceptClassSpec, KernelClassSpec]:
    """A sampled stand-in for the finite mixture class on d labels.

    Concept side: full-support distributions (the measure class of the
    counting measure).  Kernel side: a random kernel with pairwise-distinct
    columns together with all of its column permutations, so that every
    relabelling is realizable inside the sampled pool, exactly as in the
    infinite class.
    """
    labels = tuple(str(i + 1) for i in range(d))
    rng = derive_rng(seed, 0xE)
    dists = [FiniteDistribution.uniform(labels)]
    for _ in range(2):
        raw = [int(x) for x in rng.integers(1, 9, size=d)]
        total = sum(raw)
        dists.append(FiniteDistribution(labels, [F(x, total) for x in raw]))

    targets = tuple(f"z{i + 1}" for i in range(d + 1))
    while True:
        cols = []
        for _ in range(d):
            raw = [int(x) for x in rng.integers(1, 9, size=len(targets))]
            total = sum(raw)
            cols.append([F(x, total) for x in raw])
        if len({tuple(c) for c in cols}) == d:
            break
    base_rows = [[cols[j][i] for j in range(d)] for i in range(len(targets))]
    base_kernel = StochasticKernel(labels, targets, base_rows)

    pool = []
    for tau in all_permutation_maps(labels):
        mapping = tau.as_dict()
        rows = [
            [base_kernel.matrix[i][labels.index(mapping[c])] for c in labels]
            for i in range(len(targets))
        ]
        pool.append(StochasticKernel(labels, targets, rows))
    return (
        ConceptClassSpec(tuple(dists), (ConceptPredicate.full_support(),)),
        KernelClassSpec(tuple(pool), (KernelPredicate.distinct_columns(),)),
    )


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check(name: str, passed: bool, detail: str) -> CheckResult:
    return CheckResult(name=name, passed=bool(passed), detail=detail)


def run_all_checks() -> list[CheckResult]:
    """Run every bundled exact fixture; all must pass on a healthy build."""
    results: list[CheckResult] = []
    half = FiniteDistribution(("u", "v"), [F(1, 2), F(1, 2)])

    M, M2 = garbling_pair()
    P = feature_distribution(M)
    results.append(
        _check(
            "garbling_pair_feature_distribution",
            P == half and feature_distribution(M2) == half,
            f"both marginals equal (1/2, 1/2); got {P.probs} and {feature_distribution(M2).probs}",
        )
    )

    H = posterior(M.mixing, M.concept_dist)
    expected_H = StochasticKernel(
        ("u", "v"), ("a", "b"), [[F(1), F(1, 2)], [F(0), F(1, 2)]]
    )
    H2 = posterior(M2.mixing, M2.concept_dist)
    expected_H2 = StochasticKernel.identity(("c", "d"))
    results.append(
        _check(
            "garbling_pair_posteriors",
            H == expected_H
            and H2.matrix == expected_H2.matrix
            and H.matrix != H2.matrix,
            "coarse posterior [[1,1/2],[0,1/2]], fine posterior identity; extractors differ",
        )
    )

    T = garbling_witness()
    results.append(
        _check(
            "garbling_pair_published_witness_verifies",
            verify_coarsening(M, M2, T),
            "published T satisfies measure refinement and kernel coarsening",
        )
    )

    found = find_coarsening_witness(M, M2)
    results.append(
        _check(
            "garbling_pair_witness_search",
            found is not None and verify_coarsening(M, M2, found),
            "search returned a verifying witness",
        )
    )

    verdict = blackwell_relation(M, M2)
    results.append(
        _check(
            "garbling_pair_one_directional",
            verdict.relation == "coarser_only" and verdict.feature_equivalent,
            f"relation={verdict.relation}, feature_equivalent={verdict.feature_equivalent}",
        )
    )

    A, B = incomparable_pair()
    verdict2 = blackwell_relation(A, B)
    results.append(
        _check(
            "incomparable_pair_verdict",
            verdict2.relation == "incomparable" and verdict2.feature_equivalent,
            f"relation={verdict2.relation}, feature_equivalent={verdict2.feature_equivalent}",
        )
    )

    # Unconstrained kernel-coarsening systems: unique solutions with a
    # negative entry, in both directions.
    KB = B.mixing
    KA = A.mixing
    rows = []
    rhs = []
    for i in range(2):  # target z index
        for j in range(2):  # source concept index
            coeffs = [F(0)] * 4
            for m in range(2):  # summed index c'
                coeffs[m * 2 + j] = KB.matrix[i][m]
            rows.append((coeffs, KA.matrix[i][j]))
    fwd = solve_linear_system(rows, 4)
    expected_fwd = (F(5, 6), F(-1, 2), F(1, 6), F(3, 2))
    results.append(
        _check(
            "incomparable_pair_forward_unique_solution",
            fwd.status == "unique" and fwd.solution == expected_fwd,
            f"unique T = [[5/6,-1/2],[1/6,3/2]]; got {fwd.status} {fwd.solution}",
        )
    )
    rows = []
    for i in range(2):
        for j in range(2):
            coeffs = [F(0)] * 4
            for m in range(2):
                coeffs[m * 2 + j] = KA.matrix[i][m]
            rows.append((coeffs, KB.matrix[i][j]))
    bwd = solve_linear_system(rows, 4)
    expected_bwd = (F(9, 8), F(3, 8), F(-1, 8), F(5, 8))
    results.append(
        _check(
            "incomparable_pair_backward_unique_solution",
            bwd.status == "unique" and bwd.solution == expected_bwd,
            f"unique T' = [[9/8,3/8],[-1/8,5/8]]; got {bwd.status} {bwd.solution}",
        )
    )

    # Deterministic-kernel indeterminacy: a pool {E_g, E_g.swap} admits
    # exactly the identity and the swap as valid kernel transitions.
    labels = ("1", "2", "3")
    targets = ("z1", "z2", "z3", "z4")
    g = {"1": "z1", "2": "z2", "3": "z3"}
    swap = TransitionMap.from_dict({"1": "2", "2": "1", "3": "3"})
    g_swapped = {c: g[swap.apply(c)] for c in labels}
    Eg = StochasticKernel.dirac(g, labels, targets)
    Eg2 = StochasticKernel.dirac(g_swapped, labels, targets)
    found_set = valid_kernel_transitions(
        Eg,
        [Eg, Eg2],
        all_permutation_maps(labels),
        FiniteDistribution.uniform(labels),
    )
    expected_set = frozenset({TransitionMap.identity(labels), swap})
    results.append(
        _check(
            "dirac_kernel_indeterminacy_set",
            found_set == expected_set,
            f"valid kernel transitions = {{identity, swap}}; got {len(found_set)} maps",
        )
    )

    for d in (2, 3, 4):
        qs, ks = finite_mixture_class(d)
        cert = certify_identifiability(qs, ks, GroupSpec.permutations(), d)
        results.append(
            _check(
                f"finite_mixture_permutation_certificate_d{d}",
                cert.verdict,
                f"intersection of {len(cert.intersection)} maps inside the permutation group",
            )
        )
    qs, ks = finite_mixture_class(3)
    cert = certify_identifiability(qs, ks, GroupSpec.identity(), 3)
    results.append(
        _check(
            "finite_mixture_identity_group_counterexample",
            (not cert.verdict)
            and cert.counterexample is not None
            and not cert.counterexample.is_identity_on(("1", "2", "3")),
            "identity group rejected with a non-identity permutation counterexample",
        )
    )
    return results
