from fractions import Fraction as F

import pytest

from lcgm_kit import FiniteDistribution, InvalidModel, StochasticKernel
from lcgm_kit.model_io import (
    distribution_from_json,
    distribution_to_json,
    kernel_from_json,
    kernel_to_json,
    load_model,
    model_from_json,
    model_to_json,
    parse_number,
    save_model,
)
from lcgm_kit.worked_examples import garbling_pair


def test_parse_number_accepts_rationals_ints_floats():
    assert parse_number("2/3") == F(2, 3)
    assert parse_number(1) == F(1)
    assert parse_number(0.25) == 0.25
    with pytest.raises(InvalidModel):
        parse_number("2/3/4")
    with pytest.raises(InvalidModel):
        parse_number(None)


def test_distribution_roundtrip_exact():
    Q = FiniteDistribution(("a", "b"), [F(3, 4), F(1, 4)])
    assert distribution_from_json(distribution_to_json(Q)) == Q


def test_distribution_roundtrip_float():
    Q = FiniteDistribution(("a", "b"), [0.25, 0.75])
    back = distribution_from_json(distribution_to_json(Q))
    assert back.probs == Q.probs
    assert not back.is_exact


def test_kernel_roundtrip():
    K = StochasticKernel(("a", "b"), ("u", "v"), [[F(2, 3), F(0)], [F(1, 3), F(1)]])
    assert kernel_from_json(kernel_to_json(K)) == K


def test_model_roundtrip_and_exactness():
    M, _ = garbling_pair()
    back = model_from_json(model_to_json(M))
    assert back.concept_dist == M.concept_dist
    assert back.mixing == M.mixing
    assert back.is_exact


def test_mixed_entries_not_exact():
    obj = {"labels": ["a", "b"], "probs": ["1/2", 0.5]}
    assert not distribution_from_json(obj).is_exact


def test_load_model_reports_parse_location(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"concept_dist": \n  oops}')
    with pytest.raises(InvalidModel, match="line 2"):
        load_model(path)


def test_save_and_load_model(tmp_path):
    M, _ = garbling_pair()
    path = tmp_path / "model.json"
    save_model(M, path)
    back = load_model(path)
    assert back.mixing == M.mixing
