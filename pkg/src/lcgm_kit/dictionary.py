"""Spark-constrained dictionaries: certificates, sparse coding, and matching.

The spark of a matrix is the smallest number of linearly dependent
columns; spark(G) > 2s makes G injective on s-sparse vectors, which is
the identifiability-bearing property in sparse dictionary models.  Exact
spark is NP-hard in general, so this module pairs a capped brute-force
scan with the classical mutual-incoherence lower bound
spark >= 1 + 1/mu(G).

Sampling on the s-sparse set uses a full-support probability in the
measure class of the stratified base measure: supports drawn uniformly
over all coordinate subsets of size <= s, values i.i.d. standard normal.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (
    DegenerateColumn,
    DomainMismatch,
    EnumerationBoundExceeded,
    InvalidModel,
    InvariantViolation,
    NotInvertible,
    PreconditionFailed,
)
from .lp_feasibility import exact_rank
from .util import derive_rng

BRUTE_FORCE_D_CAP = 14
BRUTE_FORCE_K_CAP = 7
SUBSET_BUDGET = 500_000


class Dictionary:
    """A real p x d matrix with nonzero columns (feature dim p, concept dim d)."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        arr = np.array(matrix, dtype=float)
        if arr.ndim != 2 or arr.size == 0:
            raise InvalidModel("dictionary must be a nonempty 2-D matrix")
        norms = np.linalg.norm(arr, axis=0)
        if np.any(norms == 0.0):
            raise DegenerateColumn(f"zero columns at {np.where(norms == 0.0)[0].tolist()}")
        self.matrix = arr

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]

    def normalized(self) -> "Dictionary":
        return Dictionary(self.matrix / np.linalg.norm(self.matrix, axis=0))

    def __repr__(self):
        return f"Dictionary({self.p}x{self.d})"


@dataclass(frozen=True)
class SparseVector:
    """A sparse vector as (index, value) pairs with distinct sorted indices."""

    dim: int
    entries: tuple[tuple[int, float], ...]

    def __post_init__(self):
        idx = [i for i, _ in self.entries]
        if len(set(idx)) != len(idx):
            raise InvalidModel("sparse vector has repeated indices")
        if any(i < 0 or i >= self.dim for i in idx):
            raise InvalidModel("sparse vector index out of range")

    @property
    def nnz(self) -> int:
        return len(self.entries)

    def to_dense(self) -> np.ndarray:
        x = np.zeros(self.dim)
        for i, v in self.entries:
            x[i] = v
        return x

    @staticmethod
    def from_dense(x: np.ndarray) -> "SparseVector":
        x = np.asarray(x, dtype=float)
        nz = np.nonzero(x)[0]
        return SparseVector(x.shape[0], tuple((int(i), float(x[i])) for i in nz))


@dataclass
class SparkReport:
    """Spark evidence for one dictionary.

    ``exact_spark`` is set when the brute-force scan located the spark;
    ``spark_exceeds`` is set when the scan completed through that subset
    size without finding a dependent set (so spark > spark_exceeds).
    ``injective_on_s`` maps each queried s to True/False/None (unknown).
    """

    incoherence: float
    lower_bound: int
    exact_spark: int | None
    spark_exceeds: int | None
    injective_on_s: dict[int, bool | None]


@dataclass(frozen=True)
class ScalePermWitness:
    """Columns of one dictionary matched to scaled columns of another.

    Column i of the reference is approximated by scales[i] times column
    permutation[i] of the other dictionary.
    """

    permutation: tuple[int, ...]
    scales: tuple[float, ...]
    max_relative_error: float

    def __post_init__(self):
        if len(set(self.permutation)) != len(self.permutation):
            raise InvalidModel("witness permutation is not bijective")
        if any(s == 0.0 for s in self.scales):
            raise InvalidModel("witness scales must be nonzero")

    def inverted(self) -> "ScalePermWitness":
        d = len(self.permutation)
        perm = [0] * d
        scales = [0.0] * d
        for i, j in enumerate(self.permutation):
            perm[j] = i
            scales[j] = 1.0 / self.scales[i]
        return ScalePermWitness(tuple(perm), tuple(scales), self.max_relative_error)


def _exact_entries(arr: np.ndarray) -> bool:
    return bool(np.all(arr == np.round(arr)) and np.max(np.abs(arr), initial=0) < 2**52)


def _subset_is_independent(arr: np.ndarray, cols, rank_tol: float, exact: bool) -> bool:
    sub = arr[:, list(cols)]
    k = sub.shape[1]
    if k > sub.shape[0]:
        return False
    if exact:
        rows = [[Fraction(int(v)) for v in row] for row in np.round(sub).astype(object)]
        return exact_rank(rows) == k
    sv = np.linalg.svd(sub, compute_uv=False)
    return bool(sv[-1] > rank_tol * sv[0])


def spark_bruteforce(G: Dictionary, max_k: int, rank_tol: float = 1e-9) -> int | None:
    """Smallest k <= max_k with some k linearly dependent columns, or None.

    Rank tests use singular values against a relative threshold, or exact
    rational rank when all entries are integers.  A completed scan with no
    dependent subset means spark > max_k.
    """
    arr = G.matrix
    p, d = arr.shape
    if not 1 <= max_k <= d:
        raise InvalidModel(f"max_k must be in [1, {d}], got {max_k}")
    exact = _exact_entries(arr)

    # Any dependent subset extends to a dependent superset, so if every
    # subset at the top checkable size is independent, no smaller subset
    # can be dependent either; and any p+1 columns are always dependent.
    m = min(max_k, p)
    if math.comb(d, m) > SUBSET_BUDGET:
        raise EnumerationBoundExceeded(f"C({d},{m}) subsets exceed the enumeration budget")
    if all(
        _subset_is_independent(arr, cols, rank_tol, exact)
        for cols in itertools.combinations(range(d), m)
    ):
        if max_k > p:
            return p + 1
        return None
    for k in range(1, m + 1):
        for cols in itertools.combinations(range(d), k):
            if not _subset_is_independent(arr, cols, rank_tol, exact):
                return k
    raise InvariantViolation("dependent subset seen at top size but not during the scan")


def mutual_incoherence(G: Dictionary) -> float:
    """mu(G): largest absolute normalized inner product between distinct columns."""
    arr = G.matrix
    norms = np.linalg.norm(arr, axis=0)
    if np.any(norms == 0.0):
        raise DegenerateColumn("zero column")
    if arr.shape[1] == 1:
        return 0.0
    gram = np.abs((arr / norms).T @ (arr / norms))
    np.fill_diagonal(gram, 0.0)
    return float(gram.max())


def spark_lower_bound(mu: float, d: int) -> int:
    """The bound spark >= 1 + 1/mu, clamped to >= 2; d+1 for orthogonal columns.

    The small nudge before ceil absorbs float noise so a computed mu of
    (1/m) + eps cannot inflate the bound past its true integer value.
    """
    if mu < 0:
        raise InvalidModel("incoherence must be nonnegative")
    if mu == 0.0:
        return d + 1
    return max(2, math.ceil(1.0 + 1.0 / mu - 1e-9))


def is_injective_on_sparse(G: Dictionary, s: int, spark_info: SparkReport) -> bool | None:
    """Whether G is injective on s-sparse vectors; None when evidence is inconclusive."""
    if s < 1:
        raise InvalidModel("s must be >= 1")
    if spark_info.exact_spark is not None:
        return spark_info.exact_spark > 2 * s
    if spark_info.spark_exceeds is not None and spark_info.spark_exceeds >= 2 * s:
        return True
    if spark_info.lower_bound > 2 * s:
        return True
    return None


def spark_report(
    G: Dictionary,
    s_values: Sequence[int] = (1, 2, 3, 4),
    max_k: int | None = None,
    rank_tol: float = 1e-9,
) -> SparkReport:
    """Aggregate incoherence bound and (budget permitting) brute-force spark."""
    mu = mutual_incoherence(G)
    bound = spark_lower_bound(mu, G.d)
    exact = None
    exceeds = None
    if max_k is None and G.d <= BRUTE_FORCE_D_CAP:
        max_k = min(G.d, BRUTE_FORCE_K_CAP)
    if max_k is not None:
        exact = spark_bruteforce(G, max_k, rank_tol)
        if exact is None:
            exceeds = max_k
        elif exact < bound:
            raise InvariantViolation(
                f"exact spark {exact} below incoherence bound {bound}; rank tolerance suspect"
            )
    report = SparkReport(
        incoherence=mu,
        lower_bound=bound,
        exact_spark=exact,
        spark_exceeds=exceeds,
        injective_on_s={},
    )
    report.injective_on_s = {s: is_injective_on_sparse(G, s, report) for s in s_values}
    return report


def sample_stratified(
    d: int, s: int, n: int, seed: int, exact_size: bool = False
) -> list[SparseVector]:
    """n draws from the stratified sparse sampler.

    Supports are uniform over all coordinate subsets of size <= s (or of
    size exactly s with ``exact_size``); values on the support are i.i.d.
    standard normal.
    """
    if not 0 <= s <= d:
        raise InvalidModel(f"need 0 <= s <= d, got s={s}, d={d}")
    rng = derive_rng(seed, 0xD1C7)
    if exact_size:
        size_choices = np.full(n, s, dtype=int)
    else:
        sizes = np.arange(s + 1)
        weights = np.array([math.comb(d, int(k)) for k in sizes], dtype=float)
        size_choices = rng.choice(sizes, size=n, p=weights / weights.sum())
    out = []
    for k in size_choices:
        k = int(k)
        idx = np.sort(rng.choice(d, size=k, replace=False)) if k else np.empty(0, dtype=int)
        vals = rng.standard_normal(k)
        out.append(SparseVector(d, tuple((int(i), float(v)) for i, v in zip(idx, vals))))
    return out


def reconstruction_residual(G: Dictionary, z: np.ndarray, code: SparseVector) -> float:
    return float(np.linalg.norm(np.asarray(z, dtype=float) - G.matrix @ code.to_dense()))


def omp(G: Dictionary, z: np.ndarray, s: int, residual_tol: float = 1e-10) -> SparseVector:
    """Orthogonal matching pursuit: greedy atoms with a least-squares refit per step.

    Stops after s atoms, when the residual norm drops below residual_tol,
    or when the residual is numerically orthogonal to every column.
    """
    if s < 1:
        raise InvalidModel("s must be >= 1")
    z = np.asarray(z, dtype=float)
    if z.shape != (G.p,):
        raise DomainMismatch(f"feature vector has shape {z.shape}, expected ({G.p},)")
    arr = G.matrix
    normed = arr / np.linalg.norm(arr, axis=0)
    chosen: list[int] = []
    coef = np.empty(0)
    residual = z.copy()
    for _ in range(s):
        corr = normed.T @ residual
        if chosen:
            corr[chosen] = 0.0
        j = int(np.argmax(np.abs(corr)))
        if abs(corr[j]) <= 1e-12 * max(np.linalg.norm(residual), 1e-30):
            break
        chosen.append(j)
        coef, *_ = np.linalg.lstsq(arr[:, chosen], z, rcond=None)
        residual = z - arr[:, chosen] @ coef
        if np.linalg.norm(residual) <= residual_tol:
            break
    entries = tuple(
        (int(i), float(v)) for i, v in sorted(zip(chosen, coef), key=lambda t: t[0])
    )
    return SparseVector(G.d, entries)


def omp_batch(G: Dictionary, Z: np.ndarray, s: int, residual_tol: float = 1e-10) -> np.ndarray:
    """Vectorized OMP over the columns of Z; returns a d x n code matrix.

    Samples sharing a support are refit together (one small least-squares
    solve per distinct support per step), which is what makes alternating
    training cheap at desk scale.  Matches :func:`omp` column by column.
    """
    if s < 1:
        raise InvalidModel("s must be >= 1")
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != G.p:
        raise DomainMismatch(f"data must be {G.p} x n")
    arr = G.matrix
    normed = arr / np.linalg.norm(arr, axis=0)
    n = Z.shape[1]
    codes = np.zeros((G.d, n))
    supports: list[tuple[int, ...]] = [() for _ in range(n)]
    residual = Z.copy()
    active = np.arange(n)

    for _ in range(s):
        if active.size == 0:
            break
        corr = normed.T @ residual[:, active]
        for row, sample in enumerate(active):
            for j in supports[sample]:
                corr[j, row] = 0.0
        best = np.argmax(np.abs(corr), axis=0)
        best_val = np.abs(corr[best, np.arange(active.size)])
        res_norm = np.linalg.norm(residual[:, active], axis=0)
        alive = best_val > 1e-12 * np.maximum(res_norm, 1e-30)
        active = active[alive]
        if active.size == 0:
            break
        for sample, j in zip(active, best[alive]):
            supports[sample] = tuple(sorted(supports[sample] + (int(j),)))

        groups: dict[tuple[int, ...], list[int]] = {}
        for sample in active:
            groups.setdefault(supports[sample], []).append(sample)
        for supp, samples in groups.items():
            cols = list(supp)
            sub = arr[:, cols]
            sol, *_ = np.linalg.lstsq(sub, Z[:, samples], rcond=None)
            codes[:, samples] = 0.0
            codes[np.ix_(cols, samples)] = sol
            residual[:, samples] = Z[:, samples] - sub @ sol
        res_norm = np.linalg.norm(residual[:, active], axis=0)
        active = active[res_norm > residual_tol]
    return codes


def _column_correlations(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    An = A / np.linalg.norm(A, axis=0)
    Bn = B / np.linalg.norm(B, axis=0)
    return np.abs(An.T @ Bn)


def match_scale_permutation(
    G: Dictionary, G2: Dictionary, tol: float, method: str = "hungarian"
) -> ScalePermWitness | None:
    """Match columns of G to scaled columns of G2, up to relative error tol.

    Assignment maximizes total absolute column correlation (Hungarian by
    default, greedy as a fallback); scales are per-pair least squares.
    Returns None when any matched column misses its target by more than
    tol times the reference column norm.
    """
    if G.matrix.shape != G2.matrix.shape:
        raise DomainMismatch(f"shape mismatch {G.matrix.shape} vs {G2.matrix.shape}")
    corr = _column_correlations(G.matrix, G2.matrix)
    if method == "hungarian":
        rows, cols = linear_sum_assignment(-corr)
        perm = [0] * G.d
        for i, j in zip(rows, cols):
            perm[i] = int(j)
    elif method == "greedy":
        order = np.dstack(np.unravel_index(np.argsort(-corr, axis=None), corr.shape))[0]
        taken_i, taken_j = set(), set()
        perm = [-1] * G.d
        for i, j in order:
            if int(i) in taken_i or int(j) in taken_j:
                continue
            perm[int(i)] = int(j)
            taken_i.add(int(i))
            taken_j.add(int(j))
            if len(taken_i) == G.d:
                break
    else:
        raise InvalidModel(f"unknown matching method {method!r}")

    scales = []
    errors = []
    for i, j in enumerate(perm):
        g = G.matrix[:, i]
        h = G2.matrix[:, j]
        scale = float(g @ h) / float(h @ h)
        scales.append(scale)
        errors.append(float(np.linalg.norm(scale * h - g) / np.linalg.norm(g)))
    max_err = max(errors)
    if max_err > tol or any(s == 0.0 for s in scales):
        return None
    return ScalePermWitness(tuple(perm), tuple(scales), max_err)


def scale_perm_residuals(G: Dictionary, G2: Dictionary, witness: ScalePermWitness) -> float:
    """Max relative column error of a witness, recomputed from scratch."""
    errors = []
    for i, j in enumerate(witness.permutation):
        g = G.matrix[:, i]
        h = G2.matrix[:, j]
        errors.append(float(np.linalg.norm(witness.scales[i] * h - g) / np.linalg.norm(g)))
    return max(errors)


@dataclass
class GenPermCheck:
    is_generalized_permutation: bool
    sparsity_preserving: bool
    implication_held: bool
    probe_failures: int


def check_sparsity_preserving_is_genperm(
    T: np.ndarray,
    s: int,
    tol: float = 1e-9,
    probes: int = 200,
    seed: int = 0,
) -> GenPermCheck:
    """Probe the equivalence: invertible + sparsity-preserving <=> perm x diag.

    Tests (a) whether every T e_i is 1-sparse within tol (exactly the
    generalized-permutation property for invertible T) and (b) whether T
    maps basis vectors and random s-sparse probes into the s-sparse set;
    reports whether (b) implied (a) on this instance.
    """
    T = np.asarray(T, dtype=float)
    d = T.shape[0]
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise InvalidModel("T must be square")
    if not 1 <= s <= d - 1:
        raise InvalidModel(f"need 1 <= s <= d-1, got s={s}, d={d}")
    sv = np.linalg.svd(T, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise NotInvertible(f"condition number ~{sv[0] / max(sv[-1], 1e-300):.2e}")

    def nnz(v: np.ndarray) -> int:
        m = np.max(np.abs(v))
        if m == 0.0:
            return 0
        return int(np.sum(np.abs(v) > tol * m))

    is_genperm = all(nnz(T[:, i]) == 1 for i in range(d))

    failures = 0
    preserving = True
    for i in range(d):
        if nnz(T[:, i]) > s and s >= 1:
            preserving = False
            failures += 1
    rng = derive_rng(seed, 0x6E9)
    for _ in range(probes):
        idx = rng.choice(d, size=s, replace=False)
        c = np.zeros(d)
        c[idx] = rng.standard_normal(s)
        if nnz(T @ c) > s:
            preserving = False
            failures += 1
    return GenPermCheck(
        is_generalized_permutation=is_genperm,
        sparsity_preserving=preserving,
        implication_held=(not preserving) or is_genperm,
        probe_failures=failures,
    )


@dataclass
class DictionaryRecoveryReport:
    aligned: bool
    witness: ScalePermWitness | None
    min_abs_correlation: float
    per_column_correlation: tuple[float, ...]
    degenerate: bool
    insufficient_data: bool
    loss_trace: tuple[float, ...]
    truth: Dictionary | None
    recovered: Dictionary | None


def dictionary_recovery_experiment(
    d: int,
    p: int,
    s: int,
    n: int,
    seed: int,
    epochs: int = 40,
    match_tol: float = 0.1,
) -> DictionaryRecoveryReport:
    """Plant a random normalized dictionary, synthesize exactly-s codes, retrain.

    Reports whether alternating training recovered the planted dictionary
    up to scale and permutation, with per-column correlations under the
    matched assignment.
    """
    if s == 0:
        return DictionaryRecoveryReport(
            aligned=False,
            witness=None,
            min_abs_correlation=0.0,
            per_column_correlation=(),
            degenerate=True,
            insufficient_data=False,
            loss_trace=(0.0,),
            truth=None,
            recovered=None,
        )
    spark_possible = (p + 1 if d > p else d + 1) > 2 * s
    if not spark_possible:
        raise PreconditionFailed(f"spark > {2 * s} unattainable at p={p}, d={d}")

    rng = derive_rng(seed, 0xD1C7_0001)
    truth = Dictionary(rng.standard_normal((p, d)))
    truth = truth.normalized()
    codes = sample_stratified(d, s, n, seed=seed, exact_size=True)
    C = np.stack([c.to_dense() for c in codes], axis=1)
    Z = truth.matrix @ C

    if n < d:
        return DictionaryRecoveryReport(
            aligned=False,
            witness=None,
            min_abs_correlation=0.0,
            per_column_correlation=(),
            degenerate=False,
            insufficient_data=True,
            loss_trace=(),
            truth=truth,
            recovered=None,
        )

    from .sae import train_mod  # deferred: sae builds on this module

    result = train_mod(Z.T, d=d, s=s, epochs=epochs, seed=seed)
    recovered = result.model.decoder
    witness = match_scale_permutation(truth, recovered, tol=match_tol)
    corr = _column_correlations(truth.matrix, recovered.matrix)
    if witness is not None:
        per_col = tuple(float(corr[i, j]) for i, j in enumerate(witness.permutation))
    else:
        rows, cols = linear_sum_assignment(-corr)
        per_col = tuple(float(corr[i, j]) for i, j in zip(rows, cols))
    return DictionaryRecoveryReport(
        aligned=witness is not None,
        witness=witness,
        min_abs_correlation=min(per_col),
        per_column_correlation=per_col,
        degenerate=False,
        insufficient_data=False,
        loss_trace=tuple(result.loss_trace),
        truth=truth,
        recovered=recovered,
    )
