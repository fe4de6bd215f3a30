"""Finite probability distributions and Markov kernels.

Conventions
-----------
Distributions over a finite labelled space are column vectors; Markov
kernels are column-stochastic matrices.  ``matrix[i][j]`` is the
probability of target label ``i`` given source label ``j``, so a kernel
``K`` from ``{a, b}`` to ``{u, v}`` is laid out as::

            a      b
      u  K(u|a) K(u|b)
      v  K(v|a) K(v|b)

with every column summing to one.  The pushforward of a distribution is
the ordinary matrix-vector product, and composition of kernels is the
matrix product, so functoriality ``(LK)Q == L(KQ)`` holds exactly in
rational arithmetic.

Entries are either :class:`~fractions.Fraction` (exact) or :class:`float`.
Construction in float mode clamps negative-within-tolerance entries to
zero and renormalizes, setting a ``clamped`` flag on the result;
downstream LP and EM routines produce such tiny negatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainMismatch, InvalidModel, InvariantViolation
from .numeric import EXACT, Number, NumericMode, all_exact, coerce_number

#: Construction-time tolerance for float-valued entries (sum checks and
#: negative clamping).  Decision tolerances are supplied per operation via
#: NumericMode and are independent of this.
CONSTRUCTION_TOL = 1e-9


def _check_labels(labels: Sequence[str], what: str) -> tuple[str, ...]:
    labels = tuple(labels)
    if not labels:
        raise InvalidModel(f"{what}: label list is empty")
    if any(not isinstance(l, str) for l in labels):
        raise InvalidModel(f"{what}: labels must be strings")
    if len(set(labels)) != len(labels):
        raise InvalidModel(f"{what}: labels are not unique: {labels}")
    return labels


def _clean_weights(weights: Sequence, what: str, tol: float) -> tuple[tuple[Number, ...], bool]:
    """Validate one probability vector; returns (entries, clamped_flag)."""
    entries = [coerce_number(w) for w in weights]
    if all_exact(entries):
        if any(w < 0 for w in entries):
            raise InvalidModel(f"{what}: negative weight in exact mode")
        if sum(entries) != 1:
            raise InvalidModel(f"{what}: exact weights sum to {sum(entries)}, not 1")
        return tuple(entries), False
    entries = [float(w) for w in entries]
    clamped = False
    for i, w in enumerate(entries):
        if w < 0:
            if w < -tol:
                raise InvalidModel(f"{what}: weight {w} below -{tol}")
            entries[i] = 0.0
            clamped = True
    total = sum(entries)
    if abs(total - 1.0) > max(tol, len(entries) * 1e-12):
        raise InvalidModel(f"{what}: weights sum to {total}, not 1 within {tol}")
    if total != 1.0:
        entries = [w / total for w in entries]
    return tuple(entries), clamped


class FiniteDistribution:
    """A labelled probability vector over a finite space."""

    __slots__ = ("labels", "probs", "clamped")

    def __init__(self, labels: Sequence[str], probs: Sequence, *, tol: float = CONSTRUCTION_TOL):
        self.labels = _check_labels(labels, "distribution")
        if len(probs) != len(self.labels):
            raise InvalidModel("distribution: one weight per label required")
        self.probs, self.clamped = _clean_weights(probs, "distribution", tol)

    @property
    def is_exact(self) -> bool:
        return all_exact(self.probs)

    def prob(self, label: str) -> Number:
        return self.probs[self.labels.index(label)]

    def as_float_array(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs])

    @staticmethod
    def uniform(labels: Sequence[str]) -> "FiniteDistribution":
        labels = tuple(labels)
        return FiniteDistribution(labels, [Fraction(1, len(labels))] * len(labels))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FiniteDistribution)
            and self.labels == other.labels
            and self.probs == other.probs
        )

    def __hash__(self):
        return hash((self.labels, self.probs))

    def __repr__(self):
        body = ", ".join(f"{l}: {p}" for l, p in zip(self.labels, self.probs))
        return f"FiniteDistribution({body})"


class StochasticKernel:
    """A labelled column-stochastic matrix from source labels to target labels."""

    __slots__ = ("source_labels", "target_labels", "matrix", "clamped")

    def __init__(
        self,
        source_labels: Sequence[str],
        target_labels: Sequence[str],
        matrix: Sequence[Sequence],
        *,
        tol: float = CONSTRUCTION_TOL,
    ):
        self.source_labels = _check_labels(source_labels, "kernel source")
        self.target_labels = _check_labels(target_labels, "kernel target")
        rows = [tuple(coerce_number(x) for x in row) for row in matrix]
        if len(rows) != len(self.target_labels) or any(
            len(r) != len(self.source_labels) for r in rows
        ):
            raise InvalidModel(
                f"kernel: matrix must be {len(self.target_labels)}x{len(self.source_labels)}"
            )
        clamped = False
        columns = []
        for j in range(len(self.source_labels)):
            col, col_clamped = _clean_weights(
                [rows[i][j] for i in range(len(rows))],
                f"kernel column {self.source_labels[j]!r}",
                tol,
            )
            columns.append(col)
            clamped = clamped or col_clamped
        self.matrix = tuple(
            tuple(columns[j][i] for j in range(len(columns))) for i in range(len(rows))
        )
        self.clamped = clamped

    @property
    def is_exact(self) -> bool:
        return all(all_exact(row) for row in self.matrix)

    def entry(self, target: str, source: str) -> Number:
        return self.matrix[self.target_labels.index(target)][self.source_labels.index(source)]

    def column(self, source: str) -> FiniteDistribution:
        """The conditional distribution K(. | source) as a distribution over targets."""
        j = self.source_labels.index(source)
        return FiniteDistribution(self.target_labels, [row[j] for row in self.matrix])

    def as_float_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.matrix])

    @staticmethod
    def identity(labels: Sequence[str]) -> "StochasticKernel":
        labels = tuple(labels)
        n = len(labels)
        eye = [[Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)]
        return StochasticKernel(labels, labels, eye)

    @staticmethod
    def dirac(
        mapping: dict[str, str],
        source_labels: Sequence[str],
        target_labels: Sequence[str],
    ) -> "StochasticKernel":
        """The deterministic kernel sending each source label to mapping[label]."""
        source_labels = tuple(source_labels)
        target_labels = tuple(target_labels)
        missing = [s for s in source_labels if s not in mapping]
        if missing:
            raise InvalidModel(f"dirac kernel: mapping not total, missing {missing}")
        bad = [s for s in source_labels if mapping[s] not in target_labels]
        if bad:
            raise InvalidModel(f"dirac kernel: images outside target space for {bad}")
        rows = [
            [Fraction(1) if mapping[s] == t else Fraction(0) for s in source_labels]
            for t in target_labels
        ]
        return StochasticKernel(source_labels, target_labels, rows)

    @property
    def is_deterministic(self) -> bool:
        return all(
            sorted(self.matrix[i][j] for i in range(len(self.target_labels)))[-1] == 1
            for j in range(len(self.source_labels))
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, StochasticKernel)
            and self.source_labels == other.source_labels
            and self.target_labels == other.target_labels
            and self.matrix == other.matrix
        )

    def __hash__(self):
        return hash((self.source_labels, self.target_labels, self.matrix))

    def __repr__(self):
        return (
            f"StochasticKernel({list(self.source_labels)} -> {list(self.target_labels)}, "
            f"{[list(r) for r in self.matrix]})"
        )


@dataclass(frozen=True)
class LCGM:
    """A latent concept generative model: concept distribution plus mixing kernel."""

    concept_dist: FiniteDistribution
    mixing: StochasticKernel

    def __post_init__(self):
        if self.concept_dist.labels != self.mixing.source_labels:
            raise InvalidModel(
                "model: concept labels must equal the mixing kernel's source labels "
                f"({self.concept_dist.labels} vs {self.mixing.source_labels})"
            )

    @property
    def is_exact(self) -> bool:
        return self.concept_dist.is_exact and self.mixing.is_exact


def pushforward(K: StochasticKernel, Q: FiniteDistribution) -> FiniteDistribution:
    """The marginal KQ over K's target labels.  Requires Q.labels == K.source_labels."""
    if Q.labels != K.source_labels:
        raise DomainMismatch(
            f"pushforward: distribution labels {Q.labels} != kernel source {K.source_labels}"
        )
    probs = [sum(row[j] * Q.probs[j] for j in range(len(Q.probs))) for row in K.matrix]
    return FiniteDistribution(K.target_labels, probs)


def compose(L: StochasticKernel, K: StochasticKernel) -> StochasticKernel:
    """The composite kernel LK (apply K, then L).  Requires K targets == L sources."""
    if K.target_labels != L.source_labels:
        raise DomainMismatch(
            f"compose: inner target labels {K.target_labels} != outer source {L.source_labels}"
        )
    rows = [
        [
            sum(L.matrix[i][m] * K.matrix[m][j] for m in range(len(L.source_labels)))
            for j in range(len(K.source_labels))
        ]
        for i in range(len(L.target_labels))
    ]
    return StochasticKernel(K.source_labels, L.target_labels, rows)


def support(Q: FiniteDistribution, mode: NumericMode = EXACT) -> tuple[str, ...]:
    """Labels carrying positive mass (above tolerance in float mode), in label order."""
    return tuple(l for l, p in zip(Q.labels, Q.probs) if mode.is_positive(p))


def posterior(
    K: StochasticKernel, Q: FiniteDistribution, mode: NumericMode = EXACT
) -> StochasticKernel:
    """The Bayes inverse H of K with respect to Q.

    H(c|z) = K(z|c) Q(c) / P(z) wherever P = KQ puts positive mass.  The
    posterior is only unique P-almost everywhere; at zero-probability
    targets the column is filled with the uniform distribution over
    supp(Q), a deterministic and testable convention.
    """
    P = pushforward(K, Q)
    supp = support(Q, mode)
    if not supp:
        raise InvariantViolation("posterior: distribution has empty support under this mode")
    n_src = len(Q.labels)
    supp_set = set(supp)
    uniform_value: Number
    if Q.is_exact and K.is_exact:
        uniform_value = Fraction(1, len(supp))
    else:
        uniform_value = 1.0 / len(supp)
    columns = []
    for i, z in enumerate(K.target_labels):
        if mode.is_positive(P.probs[i]):
            col = [K.matrix[i][j] * Q.probs[j] / P.probs[i] for j in range(n_src)]
        else:
            col = [uniform_value if c in supp_set else 0 * uniform_value for c in Q.labels]
        columns.append(col)
    rows = [[columns[i][j] for i in range(len(K.target_labels))] for j in range(n_src)]
    return StochasticKernel(K.target_labels, Q.labels, rows)


def ae_equal(
    K: StochasticKernel,
    K2: StochasticKernel,
    Q: FiniteDistribution,
    mode: NumericMode = EXACT,
) -> bool:
    """Whether K and K2 agree, column by column, at every label in supp(Q)."""
    if K.source_labels != K2.source_labels or K.target_labels != K2.target_labels:
        raise DomainMismatch("ae_equal: kernels live on different label sets")
    if Q.labels != K.source_labels:
        raise DomainMismatch("ae_equal: distribution labels do not match kernel source")
    supp = set(support(Q, mode))
    for j, c in enumerate(K.source_labels):
        if c not in supp:
            continue
        for i in range(len(K.target_labels)):
            if not mode.eq(K.matrix[i][j], K2.matrix[i][j]):
                return False
    return True


def dist_equal(
    A: FiniteDistribution, B: FiniteDistribution, mode: NumericMode = EXACT
) -> bool:
    """Mode-aware equality of two distributions on the same ordered label set."""
    if A.labels != B.labels:
        raise DomainMismatch("dist_equal: distributions live on different label sets")
    return all(mode.eq(a, b) for a, b in zip(A.probs, B.probs))


def feature_distribution(M: LCGM) -> FiniteDistribution:
    """The induced feature distribution of a model: its mixing kernel pushforward."""
    return pushforward(M.mixing, M.concept_dist)
