"""Command-line entry point for reproducible counterfactual runs.

Subcommands: generate, sweep, evaluate, fidelity, export-fig3-trace.
Configuration precedence is flags > manifest file > built-in defaults, and
every run writes its fully resolved manifest next to its outputs, so re-running
a manifest reproduces the outputs bit-identically (RP included, given its
seed). Exit codes: 0 success, 2 usage/config error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import FtConfig, RpConfig, ft_generate_batch, rp_generate_batch
from .dataio import SplitSpec, fit_scaler, load_dataset, split
from .distances import (
    Distance,
    estimate_covariance,
    load_covariance,
    matrix_hash,
    save_covariance,
)
from .errors import NumericFailure
from .evaluation import compare_result_sets, report_csv, report_text
from .optimizer import (
    DEFAULT_GRID,
    FocusConfig,
    generate_batch,
    sweep_hyperparameters,
)
from .results import read_results, write_results
from .soft import SoftEnsembleParams, fidelity
from .trees import load_model

logger = logging.getLogger(__name__)

DEFAULTS = {
    "method": "focus",
    "distance": "euclidean",
    "sigma": 10.0,
    "tau": 5.0,
    "beta": 0.01,
    "lr": 0.01,
    "iters": 1000,
    "epsilon": 0.01,
    "samples": 1000,
    "noise_std": 0.5,
    "seed": 7,
    "workers": 0,
    "clamp": False,
    "train_fraction": 0.7,
}
_PATH_KEYS = ("model", "data_schema", "out", "grid")


def _add_common(parser: argparse.ArgumentParser, *, need_model=True, need_data=True):
    parser.add_argument("--manifest", help="JSON manifest supplying defaults for any flag")
    if need_model:
        parser.add_argument("--model", help="portable model JSON file")
    if need_data:
        parser.add_argument("--data-schema", dest="data_schema", help="dataset schema JSON file")
    parser.add_argument(
        "--distance", choices=("euclidean", "cosine", "manhattan", "mahalanobis")
    )
    parser.add_argument("--sigma", type=float)
    parser.add_argument("--tau", type=float)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--iters", type=int)
    parser.add_argument("--epsilon", type=float, help="feature-tweaking threshold margin")
    parser.add_argument("--samples", type=int, help="random-perturbation draw count")
    parser.add_argument("--noise-std", dest="noise_std", type=float)
    parser.add_argument("--seed", type=int, help="split shuffle and RP base seed")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--clamp", action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treecfx",
        description="Counterfactual explanations for tree ensembles",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate counterfactuals for the test split")
    _add_common(p)
    p.add_argument("--method", choices=("focus", "ft", "rp"))

    p = sub.add_parser("sweep", help="grid-search hyperparameters for the gradient method")
    _add_common(p)
    p.add_argument("--grid", help="JSON file with sigma/tau/beta/alpha lists")

    p = sub.add_parser("evaluate", help="compare two result files")
    _add_common(p, need_model=False)
    p.add_argument("--results-a", dest="results_a", required=True)
    p.add_argument("--results-b", dest="results_b", required=True)

    p = sub.add_parser("fidelity", help="agreement between the model and its approximation")
    _add_common(p)

    p = sub.add_parser("export-fig3-trace", help="write only the per-iteration trace CSV")
    _add_common(p)
    return parser


def _resolve(ns: argparse.Namespace) -> dict:
    resolved = dict(DEFAULTS)
    manifest_path = getattr(ns, "manifest", None)
    if manifest_path:
        with open(manifest_path, encoding="utf-8") as fh:
            stored = json.load(fh)
        for key, value in stored.items():
            if key in DEFAULTS or key in _PATH_KEYS or key in ("method", "results_a", "results_b"):
                resolved[key] = value
    for key in (*DEFAULTS, *_PATH_KEYS, "method", "results_a", "results_b"):
        value = getattr(ns, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _require(resolved: dict, *keys: str) -> None:
    for key in keys:
        if not resolved.get(key):
            raise ValueError(f"--{key.replace('_', '-')} is required (flag or manifest)")


def _load_inputs(resolved: dict, need_model=True):
    model = None
    if need_model:
        model_path = Path(resolved["model"])
        if not model_path.exists():
            raise ValueError(f"model file not found: {model_path}")
        model = load_model(model_path.read_bytes())
    dataset, _ = load_dataset(resolved["data_schema"])
    spec = SplitSpec(train_fraction=resolved["train_fraction"], seed=resolved["seed"])
    train, test = split(dataset, spec)
    scaler = fit_scaler(train.features)
    train_scaled = scaler.transform(train.features)
    test_scaled = scaler.transform(test.features)
    outside = np.count_nonzero((test_scaled < 0) | (test_scaled > 1))
    if outside:
        logger.warning("%d scaled test value(s) fall outside [0, 1]; left unclipped", outside)
    return model, train_scaled, test_scaled, scaler


def _distance_for(resolved: dict, train_scaled: np.ndarray, out_dir: Path | None) -> Distance:
    kind = resolved["distance"]
    if kind != "mahalanobis":
        return Distance(kind)
    digest = matrix_hash(train_scaled)
    sidecar = out_dir / f"covariance_{digest[:12]}.json" if out_dir else None
    if sidecar and sidecar.exists():
        estimate = load_covariance(sidecar, expected_hash=digest)
    else:
        estimate = estimate_covariance(train_scaled)
        if sidecar:
            save_covariance(sidecar, estimate, digest)
    return Distance(kind, covariance=estimate)


def _out_dir(resolved: dict) -> Path:
    _require(resolved, "out")
    out = Path(resolved["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, resolved: dict, command: str) -> None:
    doc = {"command": command, "version": __version__, **resolved}
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _focus_config(resolved: dict, distance: Distance) -> FocusConfig:
    return FocusConfig(
        params=SoftEnsembleParams(sigma=resolved["sigma"], tau=resolved["tau"]),
        beta=resolved["beta"],
        learning_rate=resolved["lr"],
        distance=distance,
        iterations=resolved["iters"],
        clamp_to_unit_box=bool(resolved["clamp"]),
    )


def cmd_generate(ns: argparse.Namespace) -> int:
    resolved = _resolve(ns)
    _require(resolved, "model", "data_schema")
    out = _out_dir(resolved)
    model, train_scaled, test_scaled, scaler = _load_inputs(resolved)
    distance = _distance_for(resolved, train_scaled, out)
    method = resolved["method"]
    trace = None
    if method == "focus":
        config = _focus_config(resolved, distance)
        results, trace = generate_batch(
            model, config, test_scaled, workers=resolved["workers"] or None
        )
    elif method == "ft":
        results = ft_generate_batch(model, FtConfig(epsilon=resolved["epsilon"]), test_scaled, distance)
    elif method == "rp":
        cfg = RpConfig(samples=resolved["samples"], scale=resolved["noise_std"], seed=resolved["seed"])
        results = rp_generate_batch(model, cfg, test_scaled, distance)
    else:
        raise ValueError(f"unknown method {method!r}")
    write_results(out / "results.jsonl", results)
    if trace is not None:
        trace.write_csv(out / "trace.csv")
    scaler.save(out / "scaler.json")
    _write_manifest(out, resolved, "generate")
    n_valid = sum(r.valid for r in results)
    dists = [r.distance for r in results if r.valid]
    d_mean = float(np.mean(dists)) if dists else float("nan")
    print(f"valid {n_valid}/{len(results)}, d_mean {d_mean:.6g}")
    return 0


def cmd_sweep(ns: argparse.Namespace) -> int:
    resolved = _resolve(ns)
    _require(resolved, "model", "data_schema")
    out = _out_dir(resolved)
    model, train_scaled, test_scaled, _ = _load_inputs(resolved)
    distance = _distance_for(resolved, train_scaled, out)
    if resolved.get("grid"):
        with open(resolved["grid"], encoding="utf-8") as fh:
            grid = json.load(fh)
    else:
        grid = DEFAULT_GRID
    outcome = sweep_hyperparameters(
        model,
        grid,
        test_scaled,
        distance,
        iterations=resolved["iters"],
        clamp_to_unit_box=bool(resolved["clamp"]),
        workers=resolved["workers"] or None,
    )
    outcome.write_csv(out / "sweep.csv")
    best = outcome.best_config
    best_doc = {
        "sigma": best.params.sigma,
        "tau": best.params.tau,
        "beta": best.beta,
        "alpha": best.learning_rate,
        "complete": outcome.complete,
    }
    with open(out / "best_config.json", "w", encoding="utf-8") as fh:
        json.dump(best_doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, resolved, "sweep")
    flag = "" if outcome.complete else " (incomplete: no config reached full validity)"
    print(
        f"best sigma={best.params.sigma} tau={best.params.tau} beta={best.beta} "
        f"alpha={best.learning_rate}{flag}"
    )
    return 0


def cmd_evaluate(ns: argparse.Namespace) -> int:
    resolved = _resolve(ns)
    _require(resolved, "results_a", "results_b", "data_schema")
    out = _out_dir(resolved)
    results_a = read_results(resolved["results_a"])
    results_b = read_results(resolved["results_b"])
    originals_a = {r.index: tuple(r.original) for r in results_a}
    originals_b = {r.index: tuple(r.original) for r in results_b}
    if originals_a != originals_b:
        raise ValueError("result files do not share the same instances")
    _, train_scaled, _, _ = _load_inputs(resolved, need_model=False)
    distance = _distance_for(resolved, train_scaled, out)
    cell = compare_result_sets(
        results_a,
        results_b,
        distance,
        dataset=Path(resolved["data_schema"]).stem,
        model=Path(resolved["model"]).stem if resolved.get("model") else "",
        distance_name=resolved["distance"],
    )
    (out / "report.csv").write_text(report_csv([cell]), encoding="utf-8")
    text = report_text([cell])
    (out / "report.txt").write_text(text, encoding="utf-8")
    _write_manifest(out, resolved, "evaluate")
    print(text, end="")
    return 0


def cmd_fidelity(ns: argparse.Namespace) -> int:
    resolved = _resolve(ns)
    _require(resolved, "model", "data_schema")
    model, _, test_scaled, _ = _load_inputs(resolved)
    params = SoftEnsembleParams(sigma=resolved["sigma"], tau=resolved["tau"])
    value = fidelity(model, params, test_scaled)
    print(f"fidelity {value:.6f}")
    return 0


def cmd_export_fig3_trace(ns: argparse.Namespace) -> int:
    resolved = _resolve(ns)
    _require(resolved, "model", "data_schema")
    out = _out_dir(resolved)
    model, train_scaled, test_scaled, _ = _load_inputs(resolved)
    distance = _distance_for(resolved, train_scaled, out)
    config = _focus_config(resolved, distance)
    _, trace = generate_batch(model, config, test_scaled, workers=resolved["workers"] or None)
    trace.write_csv(out / "trace.csv")
    _write_manifest(out, resolved, "export-fig3-trace")
    completion = trace.completion_iteration
    print(f"trace written; all instances valid at iteration {completion}" if completion
          else "trace written; validity never reached 100%")
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "sweep": cmd_sweep,
    "evaluate": cmd_evaluate,
    "fidelity": cmd_fidelity,
    "export-fig3-trace": cmd_export_fig3_trace,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[ns.command](ns)
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
