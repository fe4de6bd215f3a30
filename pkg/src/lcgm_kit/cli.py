"""Command-line entry point.

Subcommands: blackwell, certify, spark, dict-recover, ica-demo,
mixture-fit, sae-train, paper-examples.  Every command emits one
deterministic JSON report (sorted keys, fixed float formatting) on
stdout, optionally mirrored to --out.

Exit codes: 0 success, 1 negative verdict (e.g. a failed certificate),
2 input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .blackwell import BlackwellVerdict, blackwell_relation
from .dictionary import Dictionary, dictionary_recovery_experiment, spark_report
from .errors import LcgmError, InvalidModel, InvalidSystem, InvalidTransition, DomainMismatch
from .ica import (
    SourceSpec,
    darmois_consequence_test,
    gaussian_rotation_invariance_check,
    ica_experiment,
)
from .kernel_algebra import FiniteDistribution
from .mixture import GaussianComponent, GaussianMixture, em_fit, match_permutation
from .model_io import (
    distribution_from_json,
    kernel_from_json,
    kernel_to_json,
    load_model,
)
from .numeric import EXACT, NumericMode, float_mode
from .report import Report, input_digest, render_json
from .sae import SaeModel, posthoc_check, train_mod
from .transition_sets import (
    ConceptClassSpec,
    ConceptPredicate,
    GroupSpec,
    KernelClassSpec,
    KernelPredicate,
    certify_identifiability,
)
from .worked_examples import run_all_checks

INPUT_ERRORS = (
    InvalidModel,
    InvalidSystem,
    InvalidTransition,
    DomainMismatch,
    FileNotFoundError,
    ValueError,
)


def _read_bytes(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _parse_mode(text: str) -> NumericMode:
    if text == "exact":
        return EXACT
    if text.startswith("float:"):
        return float_mode(float(text.split(":", 1)[1]))
    raise InvalidModel(f"mode must be 'exact' or 'float:<tol>', got {text!r}")


def _load_json(path: str):
    import json

    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidModel(
                f"{path}: line {exc.lineno}, col {exc.colno}: {exc.msg}"
            ) from exc


def _witness_json(witness):
    return None if witness is None else kernel_to_json(witness.kernel)


def cmd_blackwell(args) -> tuple[dict, list[str], int]:
    mode = _parse_mode(args.mode)
    A = load_model(args.model_a)
    B = load_model(args.model_b)
    if mode.is_exact and not (A.is_exact and B.is_exact):
        raise InvalidModel("exact mode requires all-rational model entries")
    verdict: BlackwellVerdict = blackwell_relation(A, B, mode)
    body = {
        "relation": verdict.relation,
        "feature_equivalent": verdict.feature_equivalent,
        "forward_witness": _witness_json(verdict.forward),
        "backward_witness": _witness_json(verdict.backward),
        "mode": mode.describe(),
    }
    warnings = ["float-mode verdict is heuristic; exact mode is authoritative"] if verdict.heuristic else []
    return body, warnings, 0


_GROUPS = {"permutations": GroupSpec.permutations, "identity": GroupSpec.identity}
_CONCEPT_PREDS = {"full_support": ConceptPredicate.full_support}
_KERNEL_PREDS = {
    "distinct_columns": KernelPredicate.distinct_columns,
    "deterministic_injective": KernelPredicate.deterministic_injective,
}


def cmd_certify(args) -> tuple[dict, list[str], int]:
    spec = _load_json(args.classes)
    try:
        d = int(spec["d"])
        dists = [distribution_from_json(o) for o in spec["distributions"]]
        kernels = [kernel_from_json(o) for o in spec["kernels"]]
    except KeyError as exc:
        raise InvalidModel(f"class spec missing field {exc}") from exc
    cpreds = tuple(
        _CONCEPT_PREDS[name]() for name in spec.get("concept_predicates", ["full_support"])
    )
    kpreds = tuple(_KERNEL_PREDS[name]() for name in spec.get("kernel_predicates", []))
    group = _GROUPS[args.group]()
    cert = certify_identifiability(
        ConceptClassSpec(tuple(dists), cpreds),
        KernelClassSpec(tuple(kernels), kpreds),
        group,
        d,
    )
    body = {
        "class_description": cert.class_description,
        "group": args.group,
        "verdict": cert.verdict,
        "intersection_size": len(cert.intersection),
        "intersection": sorted(
            [dict(t.pairs) for t in cert.intersection], key=lambda m: sorted(m.items())
        ),
        "counterexample": dict(cert.counterexample.pairs) if cert.counterexample else None,
    }
    return body, [], 0 if cert.verdict else 1


def _load_matrix(path: str) -> np.ndarray:
    if path.endswith(".csv"):
        arr = np.loadtxt(path, delimiter=",", ndmin=2)
    else:
        obj = _load_json(path)
        if not isinstance(obj, dict) or "matrix" not in obj:
            raise InvalidModel(f"{path}: expected a JSON object with a 'matrix' field")
        arr = np.array(obj["matrix"], dtype=float)
    return arr


def cmd_spark(args) -> tuple[dict, list[str], int]:
    G = Dictionary(_load_matrix(args.matrix))
    report = spark_report(G, s_values=tuple(args.s_values), max_k=args.max_k)
    spark_str = (
        str(report.exact_spark)
        if report.exact_spark is not None
        else (f"> {report.spark_exceeds}" if report.spark_exceeds else "unknown")
    )
    body = {
        "shape": [G.p, G.d],
        "incoherence": report.incoherence,
        "spark_lower_bound": report.lower_bound,
        "exact_spark": report.exact_spark,
        "spark_exceeds": report.spark_exceeds,
        "spark": spark_str,
        "injective_on_s": {str(k): v for k, v in report.injective_on_s.items()},
    }
    return body, [], 0


def cmd_dict_recover(args) -> tuple[dict, list[str], int]:
    report = dictionary_recovery_experiment(
        d=args.d, p=args.p, s=args.s, n=args.n, seed=args.seed, epochs=args.epochs
    )
    body = {
        "aligned": report.aligned,
        "min_abs_correlation": report.min_abs_correlation,
        "per_column_correlation": list(report.per_column_correlation),
        "degenerate": report.degenerate,
        "insufficient_data": report.insufficient_data,
        "final_loss": report.loss_trace[-1] if report.loss_trace else None,
        "epochs": len(report.loss_trace) - 1 if report.loss_trace else 0,
    }
    warnings = []
    if report.insufficient_data:
        warnings.append("too few samples for the requested dictionary width")
    if report.degenerate:
        warnings.append("degenerate experiment (s = 0)")
    return body, warnings, 0


def cmd_ica_demo(args) -> tuple[dict, list[str], int]:
    kinds = tuple(args.sources.split(","))
    result, mixing = ica_experiment(kinds, n=args.n, seed=args.seed)
    invariance = gaussian_rotation_invariance_check(len(kinds), args.seed, max(args.n, 10_000))
    body = {
        "sources": list(kinds),
        "aligned": result.alignment is not None,
        "alignment_error": result.alignment_error,
        "alignment_permutation": list(result.alignment.permutation) if result.alignment else None,
        "alignment_signs": list(result.alignment.signs) if result.alignment else None,
        "mixing_condition_number": mixing.condition_number,
        "gaussian_invariance": {
            "orthogonality_error": invariance.orthogonality_error,
            "cov_frobenius_error": invariance.cov_frobenius_error,
            "passed": invariance.passed,
        },
    }
    if args.csv:
        true_cols = mixing.A / np.linalg.norm(mixing.A, axis=0)
        est = result.mixing_estimate / np.linalg.norm(result.mixing_estimate, axis=0)
        np.savetxt(args.csv, np.hstack([true_cols, est]), delimiter=",")
    return body, [], 0


def _mixture_from_json(obj) -> GaussianMixture:
    try:
        weights = [float(w) for w in obj["weights"]]
        means = obj["means"]
        covs = obj["covariances"]
    except (TypeError, KeyError) as exc:
        raise InvalidModel("mixture JSON needs weights, means, covariances") from exc
    labels = tuple(str(i + 1) for i in range(len(weights)))
    comps = tuple(
        GaussianComponent(np.array(m, dtype=float), np.array(c, dtype=float))
        for m, c in zip(means, covs)
    )
    return GaussianMixture(FiniteDistribution(labels, weights), comps)


def cmd_mixture_fit(args) -> tuple[dict, list[str], int]:
    X = np.loadtxt(args.data, delimiter=",", ndmin=2)
    result = em_fit(X, k=args.k, seed=args.seed)
    model = result.model
    body = {
        "k": args.k,
        "weights": list(model.weights.as_float_array()),
        "means": [list(c.mean) for c in model.components],
        "covariances": [[list(row) for row in c.covariance] for c in model.components],
        "log_likelihood": result.log_likelihood_trace[-1],
        "iterations": len(result.log_likelihood_trace),
        "degenerate": result.degenerate,
        "distinct_components": result.distinct,
        "reinit_events": result.reinit_events,
    }
    warnings = []
    if not result.distinct:
        warnings.append("fit contains near-duplicate components")
    if args.truth:
        truth = _mixture_from_json(_load_json(args.truth))
        perm = match_permutation(truth, model, tol=args.match_tol)
        body["truth_permutation"] = list(perm) if perm is not None else None
        body["truth_matched"] = perm is not None
        return body, warnings, 0 if perm is not None else 1
    return body, warnings, 0


def cmd_sae_train(args) -> tuple[dict, list[str], int]:
    X = np.loadtxt(args.data, delimiter=",", ndmin=2)
    result = train_mod(
        X,
        d=args.d,
        s=args.s,
        epochs=args.epochs,
        seed=args.seed,
        noise_sigma=args.sigma,
        l1_alpha=args.alpha,
    )
    check = posthoc_check(result.model)
    body = {
        "d": args.d,
        "s": args.s,
        "loss_trace": list(result.loss_trace),
        "degenerate": result.degenerate,
        "ridge_events": result.ridge_events,
        "posthoc": {
            "incoherence": check.incoherence,
            "spark_lower_bound": check.spark_lower_bound,
            "exact_spark": check.exact_spark,
            "spark_exceeds": check.spark_exceeds,
            "passes_2s": check.passes_2s,
            "conclusion": check.conclusion_text,
        },
    }
    if args.model_out:
        with open(args.model_out, "w", encoding="utf-8") as fh:
            fh.write(
                render_json(
                    {
                        "matrix": result.model.decoder.matrix,
                        "s": result.model.s,
                        "sigma": result.model.noise_sigma,
                        "alpha": result.model.l1_alpha,
                    }
                )
            )
            fh.write("\n")
    return body, [], 0


def cmd_paper_examples(args) -> tuple[dict, list[str], int]:
    results = run_all_checks()
    for r in results:
        print(("PASS " if r.passed else "FAIL ") + r.name, file=sys.stderr)
    body = {
        "checks": [
            {"name": r.name, "passed": r.passed, "detail": r.detail} for r in results
        ],
        "total": len(results),
        "failed": sum(1 for r in results if not r.passed),
    }
    return body, [], 0 if body["failed"] == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lcgm-kit",
        description="Finite kernel algebra, Blackwell ordering, and identifiability checks.",
    )
    parser.add_argument("--version", action="version", version=f"lcgm-kit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("blackwell", help="compare two models under the coarsening relation")
    p.add_argument("model_a")
    p.add_argument("model_b")
    p.add_argument("--mode", default="exact", help="exact (default) or float:<tol>")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_blackwell, digest=lambda a: (_read_bytes(a.model_a), _read_bytes(a.model_b), a.mode))

    p = sub.add_parser("certify", help="identifiability certificate for a sampled class")
    p.add_argument("classes", help="class-spec JSON (d, distributions, kernels, predicates)")
    p.add_argument("--group", choices=sorted(_GROUPS), default="permutations")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_certify, digest=lambda a: (_read_bytes(a.classes), a.group))

    p = sub.add_parser("spark", help="spark and incoherence certificates for a matrix")
    p.add_argument("--matrix", required=True, help="JSON with 'matrix' (row-major) or CSV")
    p.add_argument("--max-k", type=int, default=None, dest="max_k")
    p.add_argument("--s-values", type=int, nargs="*", default=[1, 2, 3, 4], dest="s_values")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_spark, digest=lambda a: (_read_bytes(a.matrix), a.max_k, tuple(a.s_values)))

    p = sub.add_parser("dict-recover", help="planted dictionary recovery experiment")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_dict_recover, digest=lambda a: (a.d, a.p, a.s, a.n, a.seed, a.epochs))

    p = sub.add_parser("ica-demo", help="linear ICA separation on synthetic sources")
    p.add_argument("--d", type=int, default=None, help="inferred from --sources when omitted")
    p.add_argument("--sources", default="uniform,uniform", help="comma-separated kinds")
    p.add_argument("--n", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", default=None, help="write true vs recovered mixing columns")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_ica_demo, digest=lambda a: (a.sources, a.n, a.seed))

    p = sub.add_parser("mixture-fit", help="EM fit of a Gaussian mixture from CSV data")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth", default=None, help="planted mixture JSON to match against")
    p.add_argument("--match-tol", type=float, default=0.3, dest="match_tol")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_mixture_fit, digest=lambda a: (_read_bytes(a.data), a.k, a.seed))

    p = sub.add_parser("sae-train", help="alternating sparse-autoencoder training")
    p.add_argument("--data", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--model-out", default=None, dest="model_out")
    p.add_argument("--out")
    p.set_defaults(
        fn=cmd_sae_train,
        digest=lambda a: (_read_bytes(a.data), a.d, a.s, a.epochs, a.seed, a.alpha, a.sigma),
    )

    p = sub.add_parser("paper-examples", help="run the bundled worked-example fixtures")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_paper_examples, digest=lambda a: ("fixtures",))

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        digest = input_digest(*args.digest(args))
        body, warnings, code = args.fn(args)
    except INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except LcgmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    report = Report(
        command=args.command, inputs_digest=digest, body=body, warnings=warnings
    )
    text = report.to_json()
    print(text)
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.write("\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
