"""JSON serialization for distributions, kernels, and models.

Wire format::

    {"labels": [...], "probs": [...]}                          distribution
    {"source": [...], "target": [...], "matrix": [[...], ...]} kernel (row-major)
    {"concept_dist": {...}, "mixing": {...}}                   model

Rationals are encoded as strings "p/q"; reals as JSON numbers.  The parser
accepts both; callers that need exact arithmetic must check ``is_exact``
on the parsed value (a model containing any float entry cannot be used by
the exact decision procedures).
"""

from __future__ import annotations

import json
from fractions import Fraction

from .errors import InvalidModel
from .kernel_algebra import LCGM, FiniteDistribution, StochasticKernel
from .numeric import Number


def parse_number(value) -> Number:
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidModel(f"bad rational literal {value!r}") from exc
    if isinstance(value, bool):
        raise InvalidModel(f"bad numeric entry {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return value
    raise InvalidModel(f"bad numeric entry {value!r}")


def encode_number(value: Number):
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return value


def distribution_from_json(obj: dict) -> FiniteDistribution:
    try:
        labels, probs = obj["labels"], obj["probs"]
    except (TypeError, KeyError) as exc:
        raise InvalidModel("distribution JSON needs 'labels' and 'probs'") from exc
    return FiniteDistribution(labels, [parse_number(p) for p in probs])


def distribution_to_json(Q: FiniteDistribution) -> dict:
    return {"labels": list(Q.labels), "probs": [encode_number(p) for p in Q.probs]}


def kernel_from_json(obj: dict) -> StochasticKernel:
    try:
        source, target, matrix = obj["source"], obj["target"], obj["matrix"]
    except (TypeError, KeyError) as exc:
        raise InvalidModel("kernel JSON needs 'source', 'target', 'matrix'") from exc
    rows = [[parse_number(x) for x in row] for row in matrix]
    return StochasticKernel(source, target, rows)


def kernel_to_json(K: StochasticKernel) -> dict:
    return {
        "source": list(K.source_labels),
        "target": list(K.target_labels),
        "matrix": [[encode_number(x) for x in row] for row in K.matrix],
    }


def model_from_json(obj: dict) -> LCGM:
    try:
        dist, mixing = obj["concept_dist"], obj["mixing"]
    except (TypeError, KeyError) as exc:
        raise InvalidModel("model JSON needs 'concept_dist' and 'mixing'") from exc
    return LCGM(distribution_from_json(dist), kernel_from_json(mixing))


def model_to_json(M: LCGM) -> dict:
    return {
        "concept_dist": distribution_to_json(M.concept_dist),
        "mixing": kernel_to_json(M.mixing),
    }


def load_model(path) -> LCGM:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidModel(f"{path}: line {exc.lineno}, col {exc.colno}: {exc.msg}") from exc
    return model_from_json(obj)


def save_model(M: LCGM, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(M), fh, indent=2, sort_keys=True)
        fh.write("\n")
