"""Valid transition sets and brute-force identifiability certificates.

On a finite concept space the injective self-maps are exactly the
permutations of the labels.  For a class of concept distributions given by
predicates and a class of mixing kernels given by a finite sample pool,
the certificate enumerates every permutation tau and asks:

* does relabelling by tau keep each sampled distribution inside the
  predicate class?  (valid measure transitions)
* does some pool kernel K' coarsen to the sampled kernel K through tau,
  i.e. K = K' after relabelling columns by tau, almost everywhere on the
  base measure?  (valid kernel transitions)

If the intersection of the two sets lies inside a declared transition
group, every pair of feature-equivalent models built from the sampled
classes is related by a group element.  The certificate is exact for the
sampled sub-class; sampling is the finite stand-in for infinite classes.

The base measure on the kernel side is an explicit parameter (a
full-support distribution playing the role of mu).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import (
    DomainMismatch,
    EnumerationBoundExceeded,
    InvalidTransition,
    PreconditionFailed,
)
from .kernel_algebra import (
    FiniteDistribution,
    StochasticKernel,
    ae_equal,
    compose,
    pushforward,
    support,
)
from .numeric import EXACT, NumericMode

ENUMERATION_CAP = 8  # 8! = 40320 candidate maps; desk scale


@dataclass(frozen=True)
class TransitionMap:
    """An injective map between concept labels, stored as sorted (src, dst) pairs."""

    pairs: tuple[tuple[str, str], ...]

    @staticmethod
    def from_dict(mapping: dict[str, str]) -> "TransitionMap":
        pairs = tuple(sorted(mapping.items()))
        images = [dst for _, dst in pairs]
        if len(set(images)) != len(images):
            raise InvalidTransition(f"map is not injective: {mapping}")
        return TransitionMap(pairs)

    @staticmethod
    def identity(labels: Sequence[str]) -> "TransitionMap":
        return TransitionMap.from_dict({l: l for l in labels})

    def __post_init__(self):
        images = [dst for _, dst in self.pairs]
        if len(set(images)) != len(images):
            raise InvalidTransition(f"map is not injective: {dict(self.pairs)}")

    def as_dict(self) -> dict[str, str]:
        return dict(self.pairs)

    @property
    def source_labels(self) -> tuple[str, ...]:
        return tuple(src for src, _ in self.pairs)

    def apply(self, label: str) -> str:
        for src, dst in self.pairs:
            if src == label:
                return dst
        raise InvalidTransition(f"label {label!r} outside the map's domain")

    def is_total_on(self, labels: Sequence[str]) -> bool:
        return set(self.source_labels) >= set(labels)

    def is_permutation_of(self, labels: Sequence[str]) -> bool:
        m = self.as_dict()
        return set(m.keys()) == set(labels) and set(m.values()) == set(labels)

    def is_identity_on(self, labels: Sequence[str]) -> bool:
        m = self.as_dict()
        return all(m.get(l) == l for l in labels)

    def inverse(self) -> "TransitionMap":
        return TransitionMap.from_dict({dst: src for src, dst in self.pairs})

    def after(self, other: "TransitionMap") -> "TransitionMap":
        """self composed after other: label -> self(other(label))."""
        return TransitionMap.from_dict(
            {src: self.apply(dst) for src, dst in other.pairs}
        )

    def dirac_kernel(self, labels: Sequence[str]) -> StochasticKernel:
        """The deterministic relabelling kernel on ``labels`` induced by this map."""
        if not self.is_total_on(labels):
            raise InvalidTransition("map is not total on the requested labels")
        mapping = self.as_dict()
        bad = [l for l in labels if mapping[l] not in set(labels)]
        if bad:
            raise InvalidTransition(f"map sends {bad} outside the label set")
        return StochasticKernel.dirac(mapping, labels, labels)


@dataclass(frozen=True)
class ConceptPredicate:
    """A named boolean property of finite distributions."""

    name: str
    check: Callable[[FiniteDistribution], bool]

    def __call__(self, Q: FiniteDistribution) -> bool:
        return bool(self.check(Q))

    @staticmethod
    def full_support(mode: NumericMode = EXACT) -> "ConceptPredicate":
        return ConceptPredicate(
            "full_support", lambda Q: len(support(Q, mode)) == len(Q.labels)
        )

    @staticmethod
    def measure_class_of(
        base: FiniteDistribution, mode: NumericMode = EXACT
    ) -> "ConceptPredicate":
        """Mutual absolute continuity with ``base``: identical supports."""
        base_supp = frozenset(support(base, mode))

        def check(Q: FiniteDistribution) -> bool:
            return Q.labels == base.labels and frozenset(support(Q, mode)) == base_supp

        return ConceptPredicate(f"measure_class_of({','.join(base.labels)})", check)

    @staticmethod
    def exactly(target: FiniteDistribution, mode: NumericMode = EXACT) -> "ConceptPredicate":
        """The singleton class {target} (equality under the mode)."""
        from .kernel_algebra import dist_equal

        return ConceptPredicate(
            "exactly", lambda Q: Q.labels == target.labels and dist_equal(Q, target, mode)
        )

    @staticmethod
    def custom(name: str, fn: Callable[[FiniteDistribution], bool]) -> "ConceptPredicate":
        return ConceptPredicate(name, fn)


@dataclass(frozen=True)
class KernelPredicate:
    """A named boolean property of stochastic kernels."""

    name: str
    check: Callable[[StochasticKernel], bool]

    def __call__(self, K: StochasticKernel) -> bool:
        return bool(self.check(K))

    @staticmethod
    def distinct_columns(mode: NumericMode = EXACT) -> "KernelPredicate":
        def check(K: StochasticKernel) -> bool:
            cols = [tuple(row[j] for row in K.matrix) for j in range(len(K.source_labels))]
            for a, b in itertools.combinations(cols, 2):
                if all(mode.eq(x, y) for x, y in zip(a, b)):
                    return False
            return True

        return KernelPredicate("distinct_columns", check)

    @staticmethod
    def deterministic_injective() -> "KernelPredicate":
        def check(K: StochasticKernel) -> bool:
            hits = []
            for j in range(len(K.source_labels)):
                col = [row[j] for row in K.matrix]
                ones = [i for i, v in enumerate(col) if v == 1]
                if len(ones) != 1 or any(v != 0 for i, v in enumerate(col) if i != ones[0]):
                    return False
                hits.append(ones[0])
            return len(set(hits)) == len(hits)

        return KernelPredicate("deterministic_injective", check)

    @staticmethod
    def custom(name: str, fn: Callable[[StochasticKernel], bool]) -> "KernelPredicate":
        return KernelPredicate(name, fn)


@dataclass(frozen=True)
class GroupSpec:
    """A transition group: all permutations, only the identity, or an explicit set."""

    kind: str  # "permutations" | "identity" | "explicit"
    members: frozenset[TransitionMap] | None = None

    def __post_init__(self):
        if self.kind not in ("permutations", "identity", "explicit"):
            raise InvalidTransition(f"unknown group kind {self.kind!r}")
        if self.kind == "explicit":
            if not self.members:
                raise InvalidTransition("explicit group must be a nonempty set")
            for tau in self.members:
                if tau.inverse() not in self.members:
                    raise InvalidTransition(f"group not closed under inverse: {tau}")
                for tau2 in self.members:
                    if tau.after(tau2) not in self.members:
                        raise InvalidTransition("group not closed under composition")

    @staticmethod
    def permutations() -> "GroupSpec":
        return GroupSpec("permutations")

    @staticmethod
    def identity() -> "GroupSpec":
        return GroupSpec("identity")

    @staticmethod
    def explicit(members: Iterable[TransitionMap]) -> "GroupSpec":
        return GroupSpec("explicit", frozenset(members))

    def contains(self, tau: TransitionMap, labels: Sequence[str]) -> bool:
        if self.kind == "permutations":
            return tau.is_permutation_of(labels)
        if self.kind == "identity":
            return tau.is_identity_on(labels)
        return tau in self.members


@dataclass(frozen=True)
class ConceptClassSpec:
    """A concept-distribution class: finite samples plus membership predicates."""

    samples: tuple[FiniteDistribution, ...]
    predicates: tuple[ConceptPredicate, ...]


@dataclass(frozen=True)
class KernelClassSpec:
    """A mixing-kernel class: a finite sample pool plus membership predicates."""

    samples: tuple[StochasticKernel, ...]
    predicates: tuple[KernelPredicate, ...] = ()


@dataclass(frozen=True)
class IdentifiabilityCertificate:
    class_description: str
    group: GroupSpec
    intersection: frozenset[TransitionMap]
    verdict: bool
    counterexample: TransitionMap | None = None

    def __post_init__(self):
        if not self.verdict and self.counterexample is None:
            raise InvalidTransition("negative certificate requires a counterexample")


def eval_concept_predicates(
    Q: FiniteDistribution, preds: Sequence[ConceptPredicate]
) -> tuple[bool, ...]:
    """Each predicate evaluated on Q, in order (conjunction = class membership)."""
    return tuple(p(Q) for p in preds)


def valid_measure_transitions(
    Q: FiniteDistribution,
    preds: Sequence[ConceptPredicate],
    candidates: Sequence[TransitionMap],
) -> frozenset[TransitionMap]:
    """Candidates whose relabelling of Q still satisfies every predicate."""
    keep = []
    for tau in candidates:
        pushed = pushforward(tau.dirac_kernel(Q.labels), Q)
        if all(eval_concept_predicates(pushed, preds)):
            keep.append(tau)
    return frozenset(keep)


def valid_kernel_transitions(
    K: StochasticKernel,
    kernel_class: Sequence[StochasticKernel],
    candidates: Sequence[TransitionMap],
    base: FiniteDistribution,
    mode: NumericMode = EXACT,
) -> frozenset[TransitionMap]:
    """Candidates tau with K = K' o (relabelling by tau), base-a.e., for some pool K'."""
    if len(support(base, mode)) != len(base.labels):
        raise PreconditionFailed("base measure has full support")
    if base.labels != K.source_labels:
        raise DomainMismatch("base measure labels do not match the kernel source")
    keep = []
    for tau in candidates:
        dirac = tau.dirac_kernel(K.source_labels)
        for K2 in kernel_class:
            if K2.source_labels != K.source_labels or K2.target_labels != K.target_labels:
                raise DomainMismatch("kernel class members live on different label sets")
            if ae_equal(K, compose(K2, dirac), base, mode):
                keep.append(tau)
                break
    return frozenset(keep)


def all_permutation_maps(labels: Sequence[str]) -> tuple[TransitionMap, ...]:
    labels = tuple(labels)
    if len(labels) > ENUMERATION_CAP:
        raise EnumerationBoundExceeded(
            f"{len(labels)}! candidate maps exceed the d <= {ENUMERATION_CAP} cap"
        )
    return tuple(
        TransitionMap.from_dict(dict(zip(labels, perm)))
        for perm in itertools.permutations(labels)
    )


def certify_identifiability(
    Qs: ConceptClassSpec,
    Ks: KernelClassSpec,
    group: GroupSpec,
    d: int,
    base: FiniteDistribution | None = None,
    mode: NumericMode = EXACT,
    description: str = "",
) -> IdentifiabilityCertificate:
    """Enumerate all injections of the d-label space and certify containment.

    Injections of a finite set into itself are its permutations, so the
    candidate set is the full permutation group of the shared label set.
    The verdict is True iff every map that is simultaneously a valid
    measure transition (for some sampled Q) and a valid kernel transition
    (for some sampled K against the sampled pool) belongs to ``group``.
    """
    if d > ENUMERATION_CAP:
        raise EnumerationBoundExceeded(f"d={d} exceeds the enumeration cap {ENUMERATION_CAP}")
    if not Qs.samples or not Ks.samples:
        raise PreconditionFailed("nonempty concept and kernel sample lists")
    labels = Qs.samples[0].labels
    if len(labels) != d:
        raise DomainMismatch(f"samples have {len(labels)} labels, expected d={d}")
    for Q in Qs.samples:
        if Q.labels != labels:
            raise DomainMismatch("concept samples live on different label sets")
    for K in Ks.samples:
        if K.source_labels != labels:
            raise DomainMismatch("kernel samples live on a different concept space")
    if base is None:
        base = FiniteDistribution.uniform(labels)

    candidates = all_permutation_maps(labels)
    pool = tuple(K for K in Ks.samples if all(p(K) for p in Ks.predicates))
    if not pool:
        raise PreconditionFailed("kernel pool empty after predicate filtering")

    measure_side: set[TransitionMap] = set()
    for Q in Qs.samples:
        measure_side |= valid_measure_transitions(Q, Qs.predicates, candidates)
    kernel_side: set[TransitionMap] = set()
    for K in pool:
        kernel_side |= valid_kernel_transitions(K, pool, candidates, base, mode)

    intersection = frozenset(measure_side & kernel_side)
    outside = sorted(
        (tau for tau in intersection if not group.contains(tau, labels)),
        key=lambda t: t.pairs,
    )
    verdict = not outside
    return IdentifiabilityCertificate(
        class_description=description or f"sampled class on {d} labels",
        group=group,
        intersection=intersection,
        verdict=verdict,
        counterexample=None if verdict else outside[0],
    )
