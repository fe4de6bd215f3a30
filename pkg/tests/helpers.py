"""Shared generators for exact random distributions and kernels."""

from fractions import Fraction as F

from lcgm_kit import FiniteDistribution, StochasticKernel


def random_exact_dist(rng, labels) -> FiniteDistribution:
    raw = [int(x) for x in rng.integers(1, 9, size=len(labels))]
    return FiniteDistribution(labels, [F(x, sum(raw)) for x in raw])


def random_exact_kernel(rng, source, target) -> StochasticKernel:
    cols = []
    for _ in source:
        raw = [int(x) for x in rng.integers(1, 9, size=len(target))]
        cols.append([F(x, sum(raw)) for x in raw])
    rows = [[cols[j][i] for j in range(len(source))] for i in range(len(target))]
    return StochasticKernel(source, target, rows)
