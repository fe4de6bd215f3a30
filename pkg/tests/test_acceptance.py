"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Every criterion runs at its stated tolerance and asserts its stated
runtime bound (measured around the computational work, after imports).
Run with ``pytest tests/test_acceptance.py -s`` to see the lines.
"""

import json
import math
import subprocess
import sys
import time
from fractions import Fraction as F

import numpy as np
import pytest

from lcgm_kit import (
    EXACT,
    LCGM,
    FiniteDistribution,
    StochasticKernel,
    compose,
    posterior,
    pushforward,
)
from lcgm_kit.blackwell import (
    blackwell_relation,
    find_coarsening_witness,
    is_feature_equivalent,
    verify_coarsening,
)
from lcgm_kit.dictionary import (
    Dictionary,
    dictionary_recovery_experiment,
    match_scale_permutation,
    mutual_incoherence,
    sample_stratified,
    spark_bruteforce,
    spark_lower_bound,
)
from lcgm_kit.ica import (
    SourceSpec,
    darmois_consequence_test,
    gaussian_rotation_invariance_check,
    ica_experiment,
)
from lcgm_kit.lp_feasibility import solve_linear_system
from lcgm_kit.sae import SaeModel, map_objective, elbo_limit_objective, posthoc_check, train_mod
from lcgm_kit.transition_sets import GroupSpec, certify_identifiability
from lcgm_kit.util import derive_rng
from lcgm_kit.worked_examples import (
    finite_mixture_class,
    garbling_pair,
    garbling_witness,
    incomparable_pair,
)

from helpers import random_exact_dist, random_exact_kernel


def report(number: int, name: str, elapsed: float, bound: float) -> None:
    print(f"ACCEPTANCE {number:02d} {name}: PASS ({elapsed * 1000:.2f} ms / limit {bound * 1000:.0f} ms)")
    assert elapsed < bound, f"criterion {number} exceeded its runtime bound"


def test_criterion_01_worked_pushforward_and_posterior():
    M, _ = garbling_pair()
    pushforward(M.mixing, M.concept_dist)  # warm-up; the bound covers the ops
    start = time.perf_counter()
    P = pushforward(M.mixing, M.concept_dist)
    H = posterior(M.mixing, M.concept_dist)
    elapsed = time.perf_counter() - start
    assert P.probs == (F(1, 2), F(1, 2))
    assert H.matrix == ((F(1), F(1, 2)), (F(0), F(1, 2)))
    report(1, "worked-example pushforward and posterior (exact)", elapsed, 0.001)


def test_criterion_02_coarsening_witness():
    M, M2 = garbling_pair()
    published = garbling_witness()
    find_coarsening_witness(M, M2)  # warm-up
    start = time.perf_counter()
    T = find_coarsening_witness(M, M2)
    ok_found = verify_coarsening(M, M2, T)
    ok_published = verify_coarsening(M, M2, published)
    elapsed = time.perf_counter() - start
    assert T is not None and ok_found and ok_published
    report(2, "one-directional coarsening witness (exact)", elapsed, 0.010)


def test_criterion_03_incomparable_pair():
    A, B = incomparable_pair()
    blackwell_relation(A, B)  # warm-up
    start = time.perf_counter()
    verdict = blackwell_relation(A, B)

    def kernel_rows(K_right, K_left):
        rows = []
        for i in range(2):
            for j in range(2):
                coeffs = [F(0)] * 4
                for m in range(2):
                    coeffs[m * 2 + j] = K_right.matrix[i][m]
                rows.append((tuple(coeffs), K_left.matrix[i][j]))
        return rows

    fwd = solve_linear_system(kernel_rows(B.mixing, A.mixing), 4)
    bwd = solve_linear_system(kernel_rows(A.mixing, B.mixing), 4)
    elapsed = time.perf_counter() - start
    assert verdict.relation == "incomparable" and verdict.feature_equivalent
    assert fwd.status == "unique"
    assert fwd.solution == (F(5, 6), F(-1, 2), F(1, 6), F(3, 2))
    assert bwd.status == "unique"
    assert bwd.solution == (F(9, 8), F(3, 8), F(-1, 8), F(5, 8))
    report(3, "incomparable pair with unique unconstrained solutions", elapsed, 0.010)


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


def test_criterion_04_deterministic_kernel_equivalence():
    rng = derive_rng(2024, 0xACC4)
    start = time.perf_counter()
    for _ in range(500):
        M, M2 = _planted_dirac_pair(rng)
        verdict = blackwell_relation(M, M2)
        assert verdict.relation == "equivalent"
    elapsed = time.perf_counter() - start
    report(4, "500 planted deterministic-kernel pairs all equivalent", elapsed, 5.0)


def test_criterion_05_mixture_class_certificates():
    start = time.perf_counter()
    for d in (2, 3, 4):
        qs, ks = finite_mixture_class(d)
        cert = certify_identifiability(qs, ks, GroupSpec.permutations(), d)
        assert cert.verdict
    qs, ks = finite_mixture_class(3)
    cert = certify_identifiability(qs, ks, GroupSpec.identity(), 3)
    labels = qs.samples[0].labels
    assert not cert.verdict
    assert cert.counterexample is not None
    assert cert.counterexample.is_permutation_of(labels)
    assert not cert.counterexample.is_identity_on(labels)
    elapsed = time.perf_counter() - start
    report(5, "finite-mixture identifiability certificates d in {2,3,4}", elapsed, 5.0)


def test_criterion_06_spark_suite():
    rng = derive_rng(123, 0xACC6)
    start = time.perf_counter()
    for _ in range(200):
        d = int(rng.integers(4, 13))
        p = int(rng.integers(3, 11))
        G = Dictionary(rng.standard_normal((p, d)))
        spark = spark_bruteforce(G, max_k=min(d, p + 1))
        actual = spark if spark is not None else d + 1
        assert actual >= spark_lower_bound(mutual_incoherence(G), d)

    dup = Dictionary(np.column_stack([np.eye(5), np.eye(5)[:, 2]]))
    assert spark_bruteforce(dup, max_k=5) == 2

    G = Dictionary(rng.standard_normal((8, 12)))
    assert spark_bruteforce(G, max_k=9) == 9  # injective on 4-sparse vectors
    violations = 0
    for _ in range(10_000):
        c1 = np.zeros(12)
        c2 = np.zeros(12)
        c1[rng.choice(12, size=4, replace=False)] = rng.standard_normal(4)
        c2[rng.choice(12, size=4, replace=False)] = rng.standard_normal(4)
        if not np.array_equal(c1, c2) and np.allclose(
            G.matrix @ c1, G.matrix @ c2, atol=1e-10
        ):
            violations += 1
    assert violations == 0
    elapsed = time.perf_counter() - start
    report(6, "spark bounds, duplicate columns, collision oracle", elapsed, 60.0)


def test_criterion_07_dictionary_recovery():
    start = time.perf_counter()
    successes = 0
    for seed in range(5):
        r = dictionary_recovery_experiment(d=12, p=8, s=2, n=2000, seed=seed, epochs=30)
        if r.aligned and r.min_abs_correlation >= 0.99:
            successes += 1
    elapsed = time.perf_counter() - start
    assert successes >= 4
    report(7, f"dictionary recovery {successes}/5 seeds at min |corr| >= 0.99", elapsed, 120.0)


def test_criterion_08_ica_suite():
    start = time.perf_counter()
    for d in (2, 3):
        hits = 0
        for seed in range(10):
            result, _ = ica_experiment(("uniform",) * d, n=20_000, seed=seed, tol=0.15)
            hits += result.alignment is not None
        assert hits >= 9, f"d={d}: only {hits}/10 aligned"

    invariance = gaussian_rotation_invariance_check(3, seed=0, n=50_000)
    assert invariance.passed
    assert invariance.cov_frobenius_error < 0.05

    theta = math.pi / 4
    rot = np.array(
        [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
    )
    rejected = darmois_consequence_test(
        rot, SourceSpec(("uniform", "uniform")), n=20_000, seed=3, alpha=0.01
    )
    kept = darmois_consequence_test(
        rot, SourceSpec(("gaussian", "gaussian")), n=20_000, seed=3, alpha=0.01
    )
    assert rejected.rejected and not kept.rejected
    elapsed = time.perf_counter() - start
    report(8, "ICA recovery, Gaussian invariance, independence breaking", elapsed, 120.0)


def test_criterion_09_sae_pipeline():
    start = time.perf_counter()
    successes = 0
    posthoc_ok = 0
    for seed in range(5):
        rng = derive_rng(seed, 0xD1C7_0001)
        truth = Dictionary(rng.standard_normal((8, 12))).normalized()
        C = np.stack(
            [c.to_dense() for c in sample_stratified(12, 2, 2000, seed=seed, exact_size=True)],
            axis=1,
        )
        result = train_mod((truth.matrix @ C).T, d=12, s=2, epochs=30, seed=seed)
        for a, b in zip(result.loss_trace, result.loss_trace[1:]):
            assert b <= a + 1e-6
        if match_scale_permutation(truth, result.model.decoder, tol=0.05) is not None:
            successes += 1
        if posthoc_check(result.model).passes_2s is True:
            posthoc_ok += 1
    elapsed = time.perf_counter() - start
    assert successes >= 4
    assert posthoc_ok >= 4
    report(9, f"SAE training {successes}/5 aligned, post-hoc spark evidence holds", elapsed, 120.0)


def test_criterion_10_property_suites():
    start = time.perf_counter()
    rng = derive_rng(10, 0xACCA)
    A = ("a1", "a2", "a3")
    B = ("b1", "b2")
    Cexp = ("c1", "c2", "c3")
    Z = ("u", "v", "w")

    # functoriality and Bayes consistency, exact
    for _ in range(50):
        Q = random_exact_dist(rng, A)
        K = random_exact_kernel(rng, A, B)
        L = random_exact_kernel(rng, B, Cexp)
        assert pushforward(compose(L, K), Q) == pushforward(L, pushforward(K, Q))
        P = pushforward(K, Q)
        H = posterior(K, Q)
        for i in range(len(B)):
            for j in range(len(A)):
                assert H.matrix[j][i] * P.probs[i] == K.matrix[i][j] * Q.probs[j]

    # coarsening sufficiency and transitivity
    from lcgm_kit.blackwell import TransitionWitness

    for _ in range(30):
        K3 = random_exact_kernel(rng, Cexp, Z)
        T2 = random_exact_kernel(rng, B, Cexp)
        T1 = random_exact_kernel(rng, A, B)
        Q = random_exact_dist(rng, A)
        K2 = compose(K3, T2)
        K1 = compose(K2, T1)
        M1 = LCGM(Q, K1)
        M2 = LCGM(pushforward(T1, Q), K2)
        M3 = LCGM(pushforward(T2, pushforward(T1, Q)), K3)
        assert verify_coarsening(M1, M2, TransitionWitness(T1))
        assert is_feature_equivalent(M1, M2)  # sufficiency
        assert verify_coarsening(M1, M3, TransitionWitness(compose(T2, T1)))

    # objective decomposition
    nprng = derive_rng(11, 0xACCA)
    G = Dictionary(nprng.standard_normal((6, 10)))
    model = SaeModel(G, s=3, noise_sigma=0.9, l1_alpha=0.25)
    for _ in range(50):
        z = nprng.standard_normal(6)
        dense = np.zeros(10)
        idx = nprng.choice(10, size=3, replace=False)
        dense[idx] = nprng.standard_normal(3)
        from lcgm_kit.dictionary import SparseVector

        c = SparseVector.from_dense(dense)
        lhs = map_objective(model, z, c)
        rhs = elbo_limit_objective(model, z, c) + 0.25 * float(np.abs(dense).sum())
        assert abs(lhs - rhs) < 1e-12

    # CLI determinism: byte-identical reports for identical input and seed
    from importlib import resources

    coarse = str(resources.files("lcgm_kit.fixtures").joinpath("garbling_coarse.json"))
    fine = str(resources.files("lcgm_kit.fixtures").joinpath("garbling_fine.json"))
    runs = [
        subprocess.run(
            [sys.executable, "-m", "lcgm_kit", "blackwell", coarse, fine],
            capture_output=True,
            text=True,
            check=True,
        ).stdout
        for _ in range(2)
    ]
    assert runs[0] == runs[1]
    elapsed = time.perf_counter() - start
    report(10, "invariant property suites and report determinism", elapsed, 60.0)
