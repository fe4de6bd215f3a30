"""Finite Gaussian mixtures: density, EM fitting, and permutation matching.

The identifiability story for this family is permutation-only: a mixture
with strictly positive weights and pairwise-distinct components pins down
its parameters up to relabelling the components.  At desk scale that
shows up as EM runs from different seeds agreeing after component
matching, which :func:`match_permutation` decides with a Hungarian
assignment on a mean/covariance/weight discrepancy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from .errors import DomainMismatch, InvalidModel
from .kernel_algebra import FiniteDistribution
from .util import derive_rng

logger = logging.getLogger(__name__)

COV_FLOOR = 1e-6
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class GaussianComponent:
    """One mixture component: mean vector plus symmetric positive-definite covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise InvalidModel("component needs a p-vector mean and p x p covariance")
        if np.max(np.abs(cov - cov.T), initial=0.0) > SYMMETRY_TOL:
            raise InvalidModel("covariance is not symmetric")
        if np.linalg.eigvalsh(cov)[0] <= 0:
            raise InvalidModel("covariance is not positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class GaussianMixture:
    weights: FiniteDistribution
    components: tuple[GaussianComponent, ...]

    def __post_init__(self):
        if len(self.components) != len(self.weights.labels):
            raise InvalidModel("one component per weight label required")
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise InvalidModel("components have mixed dimensions")
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim


def _log_gaussian(X: np.ndarray, comp: GaussianComponent) -> np.ndarray:
    p = comp.dim
    chol = np.linalg.cholesky(comp.covariance)
    diff = X - comp.mean
    w = solve_triangular(chol, diff.T, lower=True)
    maha = np.sum(w**2, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (p * math.log(2.0 * math.pi) + logdet + maha)


def mixture_density(M: GaussianMixture, z: np.ndarray) -> float:
    """Density of the induced feature distribution at a single point."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[1] != M.dim:
        raise DomainMismatch(f"point has dim {z.shape[1]}, mixture has {M.dim}")
    log_terms = np.stack(
        [_log_gaussian(z, c) for c in M.components], axis=1
    ) + np.log(M.weights.as_float_array())
    return float(np.exp(logsumexp(log_terms, axis=1))[0])


def check_distinct_gaussian(M: GaussianMixture, tol: float) -> bool:
    """All component pairs differ by more than tol in max-norm on stacked parameters."""
    stacked = [
        np.concatenate([c.mean, c.covariance.ravel()]) for c in M.components
    ]
    for i in range(M.k - 1):
        for j in range(i + 1, M.k):
            if np.max(np.abs(stacked[i] - stacked[j])) <= tol:
                return False
    return True


def _floor_covariance(cov: np.ndarray) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    evals, evecs = np.linalg.eigh(cov)
    evals = np.clip(evals, COV_FLOOR, None)
    return evecs @ np.diag(evals) @ evecs.T


def _kmeans_plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    for _ in range(k - 1):
        dist2 = np.min(
            np.stack([np.sum((X - c) ** 2, axis=1) for c in centers], axis=1), axis=1
        )
        total = dist2.sum()
        if total <= 0:
            centers.append(X[rng.integers(n)])
            continue
        centers.append(X[rng.choice(n, p=dist2 / total)])
    return np.stack(centers)


def _init_model(X: np.ndarray, k: int, rng: np.random.Generator) -> GaussianMixture:
    n, p = X.shape
    centers = _kmeans_plus_plus(X, k, rng)
    assign = np.argmin(
        np.stack([np.sum((X - c) ** 2, axis=1) for c in centers], axis=1), axis=1
    )
    global_cov = _floor_covariance(np.cov(X.T, bias=True).reshape(p, p))
    comps = []
    weights = []
    for c in range(k):
        members = X[assign == c]
        weights.append(max(len(members), 1) / n)
        if len(members) >= 2:
            cov = _floor_covariance(np.cov(members.T, bias=True).reshape(p, p))
            comps.append(GaussianComponent(members.mean(axis=0), cov))
        else:
            mean = members.mean(axis=0) if len(members) else centers[c]
            comps.append(GaussianComponent(mean, global_cov))
    total = sum(weights)
    labels = tuple(str(i + 1) for i in range(k))
    return GaussianMixture(
        FiniteDistribution(labels, [w / total for w in weights]), tuple(comps)
    )


@dataclass
class EmResult:
    model: GaussianMixture
    log_likelihood_trace: tuple[float, ...]
    degenerate: bool
    reinit_events: int
    distinct: bool


def em_fit(
    data: np.ndarray,
    k: int,
    init: GaussianMixture | None = None,
    seed: int = 0,
    max_iters: int = 200,
    ll_tol: float = 1e-8,
) -> EmResult:
    """Expectation-maximization with covariance flooring and empty-cluster rescue.

    ``init`` may be an explicit starting model; otherwise k-means++ seeding
    with ``seed``.  The log-likelihood trace is nondecreasing up to 1e-8
    slack; an empty component is reinitialized at the point farthest from
    the current means (logged, never fatal).  Near-duplicate components are
    flagged via ``distinct`` rather than forbidden.
    """
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise InvalidModel("data must be n x p")
    n, p = X.shape
    if k < 1 or n < k:
        raise InvalidModel(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = derive_rng(seed, 0x6A55)
    model = init if init is not None else _init_model(X, k, rng)
    if init is not None and (model.k != k or model.dim != p):
        raise DomainMismatch("explicit init has wrong k or dimension")

    weights = model.weights.as_float_array()
    means = np.stack([c.mean for c in model.components])
    covs = np.stack([c.covariance for c in model.components])

    trace = []
    reinits = 0
    for _ in range(max_iters):
        log_resp = np.stack(
            [
                _log_gaussian(X, GaussianComponent(means[c], covs[c]))
                for c in range(k)
            ],
            axis=1,
        ) + np.log(np.maximum(weights, 1e-300))
        ll = float(np.sum(logsumexp(log_resp, axis=1)))
        trace.append(ll)
        resp = np.exp(log_resp - logsumexp(log_resp, axis=1, keepdims=True))

        mass = resp.sum(axis=0)
        for c in range(k):
            if mass[c] < n * 1e-12:
                far = int(np.argmax(np.min(
                    np.sum((X[:, None, :] - means[None, :, :]) ** 2, axis=2), axis=1
                )))
                logger.info("em_fit: reinitializing empty component %d at sample %d", c, far)
                means[c] = X[far]
                covs[c] = _floor_covariance(np.cov(X.T, bias=True).reshape(p, p))
                resp[:, c] = 1.0 / n
                mass[c] = resp[:, c].sum()
                reinits += 1
        weights = mass / mass.sum()
        for c in range(k):
            means[c] = resp[:, c] @ X / mass[c]
            diff = X - means[c]
            covs[c] = _floor_covariance((resp[:, c] * diff.T) @ diff / mass[c])
        if len(trace) >= 2 and abs(trace[-1] - trace[-2]) <= ll_tol:
            break

    comps = tuple(GaussianComponent(means[c], covs[c]) for c in range(k))
    labels = tuple(str(i + 1) for i in range(k))
    fitted = GaussianMixture(FiniteDistribution(labels, list(weights)), comps)
    floored = any(np.linalg.eigvalsh(c.covariance)[0] <= COV_FLOOR * (1 + 1e-9) for c in comps)
    return EmResult(
        model=fitted,
        log_likelihood_trace=tuple(trace),
        degenerate=bool(floored or n <= k),
        reinit_events=reinits,
        distinct=check_distinct_gaussian(fitted, 1e-6),
    )


def match_permutation(M: GaussianMixture, M2: GaussianMixture, tol: float) -> tuple[int, ...] | None:
    """Component assignment with worst matched discrepancy at most tol.

    Discrepancy mixes mean distance, covariance Frobenius distance, and
    weight difference with unit weights.  The Hungarian assignment
    minimizes the total; the returned permutation sends component i of M
    to component perm[i] of M2, or None when the worst pair exceeds tol.
    """
    if M.k != M2.k or M.dim != M2.dim:
        raise DomainMismatch("mixtures differ in k or dimension")
    w1 = M.weights.as_float_array()
    w2 = M2.weights.as_float_array()
    cost = np.empty((M.k, M.k))
    for i in range(M.k):
        for j in range(M.k):
            cost[i, j] = (
                np.linalg.norm(M.components[i].mean - M2.components[j].mean)
                + np.linalg.norm(
                    M.components[i].covariance - M2.components[j].covariance, "fro"
                )
                + abs(w1[i] - w2[j])
            )
    rows, cols = linear_sum_assignment(cost)
    if float(cost[rows, cols].max()) > tol:
        return None
    perm = [0] * M.k
    for i, j in zip(rows, cols):
        perm[i] = int(j)
    return tuple(perm)


def sample_mixture(M: GaussianMixture, n: int, rng: np.random.Generator) -> np.ndarray:
    """n draws from the mixture (ancestral sampling)."""
    weights = M.weights.as_float_array()
    counts = rng.multinomial(n, weights)
    blocks = []
    for c, m in zip(M.components, counts):
        if m:
            blocks.append(rng.multivariate_normal(c.mean, c.covariance, size=m))
    X = np.concatenate(blocks, axis=0)
    rng.shuffle(X)
    return X
