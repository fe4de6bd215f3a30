"""Command-line surface: smoke runs, exit codes, and byte-level determinism."""

import json
import subprocess
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from lcgm_kit.util import derive_rng


def run_cli(*args, check=False):
    proc = subprocess.run(
        [sys.executable, "-m", "lcgm_kit", *args],
        capture_output=True,
        text=True,
    )
    if check and proc.returncode != 0:
        raise AssertionError(f"cli failed ({proc.returncode}): {proc.stderr}")
    return proc


def fixture_path(name: str) -> str:
    return str(resources.files("lcgm_kit.fixtures").joinpath(name))


@pytest.fixture(scope="module")
def blob_csv(tmp_path_factory):
    rng = derive_rng(0, 0xB10B)
    blobs = np.concatenate(
        [
            rng.multivariate_normal([0, 0], np.eye(2) * 0.4, size=400),
            rng.multivariate_normal([6, 0], np.eye(2) * 0.5, size=300),
            rng.multivariate_normal([0, 7], np.eye(2) * 0.6, size=300),
        ]
    )
    path = tmp_path_factory.mktemp("data") / "blobs.csv"
    np.savetxt(path, blobs, delimiter=",")
    return str(path)


@pytest.fixture(scope="module")
def sae_csv(tmp_path_factory):
    from lcgm_kit.dictionary import Dictionary, sample_stratified

    rng = derive_rng(0, 0xD1C7_0001)
    truth = Dictionary(rng.standard_normal((8, 12))).normalized()
    C = np.stack(
        [c.to_dense() for c in sample_stratified(12, 2, 800, seed=0, exact_size=True)],
        axis=1,
    )
    path = tmp_path_factory.mktemp("data") / "sae.csv"
    np.savetxt(path, (truth.matrix @ C).T, delimiter=",")
    return str(path)


def test_blackwell_command_reports_relation():
    proc = run_cli(
        "blackwell",
        fixture_path("garbling_coarse.json"),
        fixture_path("garbling_fine.json"),
        check=True,
    )
    body = json.loads(proc.stdout)["body"]
    assert body["relation"] == "coarser_only"
    assert body["feature_equivalent"] is True
    assert body["forward_witness"] is not None


def test_blackwell_incomparable_pair():
    proc = run_cli(
        "blackwell",
        fixture_path("incomparable_left.json"),
        fixture_path("incomparable_right.json"),
        check=True,
    )
    body = json.loads(proc.stdout)["body"]
    assert body["relation"] == "incomparable"
    assert body["feature_equivalent"] is True


def test_blackwell_same_model_equivalent():
    proc = run_cli(
        "blackwell",
        fixture_path("garbling_coarse.json"),
        fixture_path("garbling_coarse.json"),
        check=True,
    )
    assert json.loads(proc.stdout)["body"]["relation"] == "equivalent"


def test_parse_error_exits_two(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    proc = run_cli("blackwell", str(bad), fixture_path("garbling_fine.json"))
    assert proc.returncode == 2
    assert "line" in proc.stderr


def test_missing_file_exits_two():
    proc = run_cli("blackwell", "/nonexistent.json", fixture_path("garbling_fine.json"))
    assert proc.returncode == 2


def test_domain_mismatch_exits_two(tmp_path):
    other = tmp_path / "other.json"
    other.write_text(
        json.dumps(
            {
                "concept_dist": {"labels": ["a"], "probs": ["1"]},
                "mixing": {"source": ["a"], "target": ["z1", "z2"], "matrix": [["1"], ["0"]]},
            }
        )
    )
    proc = run_cli("blackwell", str(other), fixture_path("garbling_fine.json"))
    assert proc.returncode == 2


def test_spark_command_identity(tmp_path):
    matrix = tmp_path / "id4.json"
    matrix.write_text(json.dumps({"matrix": np.eye(4).tolist()}))
    proc = run_cli("spark", "--matrix", str(matrix), "--max-k", "4", check=True)
    body = json.loads(proc.stdout)["body"]
    assert body["spark"] == "> 4"
    assert body["exact_spark"] is None
    assert body["injective_on_s"]["1"] is True


def test_certify_command_and_negative_exit(tmp_path):
    from lcgm_kit.model_io import distribution_to_json, kernel_to_json
    from lcgm_kit.worked_examples import finite_mixture_class

    qs, ks = finite_mixture_class(3)
    spec = {
        "d": 3,
        "distributions": [distribution_to_json(q) for q in qs.samples],
        "kernels": [kernel_to_json(k) for k in ks.samples],
        "concept_predicates": ["full_support"],
        "kernel_predicates": ["distinct_columns"],
    }
    path = tmp_path / "classes.json"
    path.write_text(json.dumps(spec))

    ok = run_cli("certify", str(path), "--group", "permutations", check=True)
    assert json.loads(ok.stdout)["body"]["verdict"] is True

    bad = run_cli("certify", str(path), "--group", "identity")
    assert bad.returncode == 1
    assert json.loads(bad.stdout)["body"]["counterexample"] is not None


def test_mixture_fit_command(blob_csv):
    proc = run_cli("mixture-fit", "--data", blob_csv, "--k", "3", "--seed", "1", check=True)
    body = json.loads(proc.stdout)["body"]
    assert body["k"] == 3
    assert len(body["means"]) == 3
    assert body["distinct_components"] is True


def test_ica_demo_command(tmp_path):
    csv = tmp_path / "cols.csv"
    proc = run_cli(
        "ica-demo",
        "--sources",
        "uniform,uniform",
        "--n",
        "20000",
        "--seed",
        "7",
        "--csv",
        str(csv),
        check=True,
    )
    body = json.loads(proc.stdout)["body"]
    assert body["aligned"] is True
    assert body["gaussian_invariance"]["passed"] is True
    assert csv.exists()


def test_sae_train_command(sae_csv, tmp_path):
    model_out = tmp_path / "model.json"
    proc = run_cli(
        "sae-train",
        "--data",
        sae_csv,
        "--d",
        "12",
        "--s",
        "2",
        "--epochs",
        "15",
        "--seed",
        "0",
        "--model-out",
        str(model_out),
        check=True,
    )
    body = json.loads(proc.stdout)["body"]
    assert body["posthoc"]["passes_2s"] is True
    losses = body["loss_trace"]
    assert all(b <= a + 1e-6 for a, b in zip(losses, losses[1:]))
    saved = json.loads(model_out.read_text())
    assert len(saved["matrix"]) == 8 and len(saved["matrix"][0]) == 12


def test_dict_recover_command():
    proc = run_cli(
        "dict-recover",
        "--d", "12", "--p", "8", "--s", "2", "--n", "1200",
        "--seed", "2", "--epochs", "25",
        check=True,
    )
    body = json.loads(proc.stdout)["body"]
    assert body["aligned"] is True


def test_paper_examples_command_passes():
    proc = run_cli("paper-examples", check=True)
    body = json.loads(proc.stdout)["body"]
    assert body["failed"] == 0
    assert body["total"] >= 10
    assert "PASS" in proc.stderr


def test_reports_are_byte_identical_across_runs(blob_csv):
    first = run_cli("mixture-fit", "--data", blob_csv, "--k", "3", "--seed", "5", check=True)
    second = run_cli("mixture-fit", "--data", blob_csv, "--k", "3", "--seed", "5", check=True)
    assert first.stdout == second.stdout

    a = run_cli(
        "blackwell",
        fixture_path("garbling_coarse.json"),
        fixture_path("garbling_fine.json"),
        check=True,
    )
    b = run_cli(
        "blackwell",
        fixture_path("garbling_coarse.json"),
        fixture_path("garbling_fine.json"),
        check=True,
    )
    assert a.stdout == b.stdout


def test_out_flag_mirrors_stdout(tmp_path):
    out = tmp_path / "report.json"
    proc = run_cli(
        "blackwell",
        fixture_path("garbling_coarse.json"),
        fixture_path("garbling_fine.json"),
        "--out",
        str(out),
        check=True,
    )
    assert out.read_text().strip() == proc.stdout.strip()


def test_float_mode_flag(tmp_path):
    proc = run_cli(
        "blackwell",
        fixture_path("garbling_coarse.json"),
        fixture_path("garbling_fine.json"),
        "--mode",
        "float:1e-9",
        check=True,
    )
    out = json.loads(proc.stdout)
    assert out["body"]["relation"] == "coarser_only"
    assert any("heuristic" in w for w in out["warnings"])
