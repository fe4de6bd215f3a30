"""Feature equivalence and Blackwell coarsening between finite models.

A model M = (Q, K) is Blackwell coarser than M' = (Q', K') under a
transition kernel T from C to C' when

* measure refinement:  Q' = T Q, and
* kernel coarsening:   K agrees with K'T on supp(Q).

Coarsening in either direction implies equal induced feature
distributions; witness search is therefore an exact linear feasibility
question over the entries of T (column-stochastic, both conditions as
equalities), decided by :mod:`lcgm_kit.lp_feasibility`.

Exact mode is authoritative.  Float-mode decisions are offered for
measured models: each equality is relaxed by a bounded slack of at most
the mode tolerance and the resulting system is still decided exactly;
verdicts computed this way carry ``heuristic=True``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainMismatch, InvariantViolation, PreconditionFailed
from .kernel_algebra import (
    LCGM,
    FiniteDistribution,
    StochasticKernel,
    ae_equal,
    compose,
    dist_equal,
    feature_distribution,
    pushforward,
    support,
)
from .lp_feasibility import FeasibilitySystem, exact_rank, solve_feasibility
from .numeric import EXACT, NumericMode


@dataclass(frozen=True)
class TransitionWitness:
    """A transition kernel T from one concept space to another."""

    kernel: StochasticKernel


@dataclass(frozen=True)
class BlackwellVerdict:
    """Outcome of comparing two models under the Blackwell coarsening relation.

    ``relation`` is one of "equivalent", "coarser_only" (first model is
    coarser), "finer_only", or "incomparable".  Any witness carried by the
    verdict has been re-verified.
    """

    relation: str
    feature_equivalent: bool
    forward: TransitionWitness | None = None
    backward: TransitionWitness | None = None
    heuristic: bool = False

    def __post_init__(self):
        if self.relation == "equivalent" and not self.feature_equivalent:
            raise InvariantViolation("equivalent models must be feature equivalent")
        expected = {
            "equivalent": (True, True),
            "coarser_only": (True, False),
            "finer_only": (False, True),
            "incomparable": (False, False),
        }
        if self.relation not in expected:
            raise InvariantViolation(f"unknown relation {self.relation!r}")
        has = (self.forward is not None, self.backward is not None)
        if has != expected[self.relation]:
            raise InvariantViolation(f"witnesses {has} inconsistent with {self.relation!r}")


def is_feature_equivalent(M: LCGM, M2: LCGM, mode: NumericMode = EXACT) -> bool:
    """Whether both models induce the same feature distribution under ``mode``."""
    if M.mixing.target_labels != M2.mixing.target_labels:
        raise DomainMismatch("models do not share a feature label set")
    return dist_equal(feature_distribution(M), feature_distribution(M2), mode)


def is_measure_separating(K: StochasticKernel, mode: NumericMode = EXACT) -> bool:
    """Full column rank of the kernel matrix (injective pushforward on the simplex)."""
    ncols = len(K.source_labels)
    if mode.is_exact and K.is_exact:
        return exact_rank(K.matrix) == ncols
    arr = K.as_float_array()
    sv = np.linalg.svd(arr, compute_uv=False)
    tol = (mode.tolerance if not mode.is_exact else 1e-12) * (sv[0] if sv.size else 1.0)
    return int(np.sum(sv > tol)) == ncols


def _require_exact(*models: LCGM) -> None:
    if not all(m.is_exact for m in models):
        raise PreconditionFailed("exact (all-rational) model entries")


def _witness_system(M: LCGM, M2: LCGM, tolerance: Fraction | None) -> tuple[FeasibilitySystem, list[tuple[str, str]]]:
    """Encode 'M is Blackwell coarser than M2' as a feasibility system.

    Variables are the entries T(c'|c).  With a tolerance, the refinement
    and coarsening equalities each get a slack in [-tol, tol] (encoded by
    two bounded nonnegative slacks); column stochasticity stays exact.
    """
    C = M.concept_dist.labels
    C2 = M2.concept_dist.labels
    Z = M.mixing.target_labels
    var_index = {}
    order = []
    for c in C:
        for c2 in C2:
            var_index[(c2, c)] = len(order)
            order.append((c2, c))
    nT = len(order)

    rows: list[tuple[dict[int, Fraction], Fraction]] = []

    def frac(x) -> Fraction:
        return x if isinstance(x, Fraction) else Fraction(x)

    # column stochasticity of T (exact even in relaxed mode)
    for c in C:
        rows.append(({var_index[(c2, c)]: Fraction(1) for c2 in C2}, Fraction(1)))
    n_exact_rows = len(rows)

    # measure refinement: sum_c T(c'|c) Q(c) = Q'(c')
    Q, Q2 = M.concept_dist, M2.concept_dist
    for i2, c2 in enumerate(C2):
        coeffs = {
            var_index[(c2, c)]: frac(Q.probs[j])
            for j, c in enumerate(C)
            if Q.probs[j] != 0
        }
        rows.append((coeffs, frac(Q2.probs[i2])))

    # kernel coarsening on supp(Q): sum_{c'} K'(z|c') T(c'|c) = K(z|c)
    supp_mode = EXACT if tolerance is None else NumericMode(float(tolerance))
    supp = support(Q, supp_mode)
    K, K2 = M.mixing, M2.mixing
    for c in supp:
        j = C.index(c)
        for i, z in enumerate(Z):
            coeffs = {}
            for j2, c2 in enumerate(C2):
                v = frac(K2.matrix[i][j2])
                if v != 0:
                    coeffs[var_index[(c2, c)]] = v
            rows.append((coeffs, frac(K.matrix[i][j])))

    num_vars = nT
    dense_rows = []
    if tolerance is None:
        for coeffs, rhs in rows:
            dense = [Fraction(0)] * num_vars
            for k, v in coeffs.items():
                dense[k] = v
            dense_rows.append((dense, rhs))
        nonneg = frozenset(range(nT))
    else:
        tol = frac(tolerance)
        # relaxed row: a.x + s+ - s- = b, s+ + t+ = tol, s- + t- = tol
        extra = 4 * (len(rows) - n_exact_rows)
        num_vars = nT + extra
        nonneg = set(range(nT))
        next_var = nT
        expanded = []
        for ridx, (coeffs, rhs) in enumerate(rows):
            if ridx < n_exact_rows:
                expanded.append((dict(coeffs), rhs))
                continue
            sp, sm, tp, tm = next_var, next_var + 1, next_var + 2, next_var + 3
            next_var += 4
            nonneg.update((sp, sm, tp, tm))
            row = dict(coeffs)
            row[sp] = Fraction(1)
            row[sm] = Fraction(-1)
            expanded.append((row, rhs))
            expanded.append(({sp: Fraction(1), tp: Fraction(1)}, tol))
            expanded.append(({sm: Fraction(1), tm: Fraction(1)}, tol))
        for coeffs, rhs in expanded:
            dense = [Fraction(0)] * num_vars
            for k, v in coeffs.items():
                dense[k] = v
            dense_rows.append((dense, rhs))
        nonneg = frozenset(nonneg)

    return FeasibilitySystem.build(num_vars, dense_rows, nonneg), order


def find_coarsening_witness(
    M: LCGM, M2: LCGM, mode: NumericMode = EXACT
) -> TransitionWitness | None:
    """Search for T certifying that M is Blackwell coarser than M2.

    Returns None exactly when the feasibility system is infeasible.  In
    float mode the returned kernel is an exact solution of the relaxed
    system; callers should re-verify with :func:`verify_coarsening`.
    """
    if M.mixing.target_labels != M2.mixing.target_labels:
        raise DomainMismatch("models do not share a feature label set")
    if mode.is_exact:
        _require_exact(M, M2)
        tolerance = None
    else:
        tolerance = Fraction(mode.tolerance)
    system, order = _witness_system(M, M2, tolerance)
    result = solve_feasibility(system)
    if not result.feasible:
        return None
    C, C2 = M.concept_dist.labels, M2.concept_dist.labels
    entries = dict(zip(order, result.witness))
    rows = [[entries[(c2, c)] for c in C] for c2 in C2]
    return TransitionWitness(StochasticKernel(C, C2, rows))


def verify_coarsening(
    M: LCGM, M2: LCGM, T: TransitionWitness, mode: NumericMode = EXACT
) -> bool:
    """Check both coarsening conditions for T; also asserts their consequence.

    When the conditions hold, equal feature distributions are mathematically
    implied, so a failed equality check at the appropriately amplified
    tolerance raises :class:`InvariantViolation` instead of returning False.
    """
    kernel = T.kernel
    if kernel.source_labels != M.concept_dist.labels:
        raise DomainMismatch("witness source labels do not match the coarser model")
    if kernel.target_labels != M2.concept_dist.labels:
        raise DomainMismatch("witness target labels do not match the finer model")
    if M.mixing.target_labels != M2.mixing.target_labels:
        raise DomainMismatch("models do not share a feature label set")

    refinement = dist_equal(pushforward(kernel, M.concept_dist), M2.concept_dist, mode)
    coarsening = ae_equal(M.mixing, compose(M2.mixing, kernel), M.concept_dist, mode)
    if not (refinement and coarsening):
        return False
    # |P^M - P^M'| <= tol * (1 + |C'|) entrywise when both conditions hold
    # within tol, so check the implied equality only at that inflated level.
    if mode.is_exact:
        feq_mode = mode
    else:
        feq_mode = NumericMode(mode.tolerance * (1 + len(M2.concept_dist.labels)))
    if not is_feature_equivalent(M, M2, feq_mode):
        raise InvariantViolation(
            "coarsening conditions hold but feature distributions differ"
        )
    return True


def blackwell_relation(M: LCGM, M2: LCGM, mode: NumericMode = EXACT) -> BlackwellVerdict:
    """Decide the full relation by witness search in both directions."""
    forward = find_coarsening_witness(M, M2, mode)
    backward = find_coarsening_witness(M2, M, mode)
    if forward is not None and not verify_coarsening(M, M2, forward, mode):
        raise InvariantViolation("forward witness failed verification")
    if backward is not None and not verify_coarsening(M2, M, backward, mode):
        raise InvariantViolation("backward witness failed verification")
    feq = is_feature_equivalent(M, M2, mode)
    if forward is not None and backward is not None:
        relation = "equivalent"
    elif forward is not None:
        relation = "coarser_only"
    elif backward is not None:
        relation = "finer_only"
    else:
        relation = "incomparable"
    return BlackwellVerdict(
        relation=relation,
        feature_equivalent=feq,
        forward=forward,
        backward=backward,
        heuristic=not mode.is_exact,
    )


def check_lemma1_instance(
    M: LCGM, M2: LCGM, T: TransitionWitness, mode: NumericMode = EXACT
) -> bool:
    """Measure refinement is implied once the other two hypotheses hold.

    Preconditions (each reported by name when violated): the finer model's
    kernel is measure-separating, the kernel-coarsening condition holds for
    T, and the two models are feature equivalent.  Under these, returns
    whether Q' = TQ; callers may assert the result is always True.
    """
    failed = []
    if not is_measure_separating(M2.mixing, mode):
        failed.append("finer kernel measure-separating")
    try:
        if not ae_equal(M.mixing, compose(M2.mixing, T.kernel), M.concept_dist, mode):
            failed.append("kernel coarsening K ~ K'T on supp(Q)")
    except DomainMismatch:
        failed.append("kernel coarsening K ~ K'T on supp(Q)")
    try:
        if not is_feature_equivalent(M, M2, mode):
            failed.append("feature equivalence")
    except DomainMismatch:
        failed.append("feature equivalence")
    if failed:
        raise PreconditionFailed(failed)
    return dist_equal(pushforward(T.kernel, M.concept_dist), M2.concept_dist, mode)
