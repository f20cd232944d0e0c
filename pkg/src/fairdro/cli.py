"""Command-line interface: train, audit, frontier, synth, bench.

Exit codes: 0 success, 1 user or input error, 2 numerical non-convergence
(outputs are still written in that case). File formats are documented in
docs/formats.md.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .core import (
    AmbiguityConfig,
    ConfigError,
    ContractViolation,
    Dataset,
    GroundMetric,
    MarginalStats,
    ModelWeights,
    UndefinedUnfairness,
    load_dataset_csv,
    save_dataset_csv,
)
from .experiments import (
    add_intercept,
    default_eta,
    frontier_gap,
    generate,
    pareto_frontier,
    run_benchmark,
    standardize_features,
    SyntheticSpec,
)
from .quantify import (
    AuditInstance,
    ClassifierRegions,
    audit_report,
    fairness_distance,
)
from .training import TrainConfig, fit_drflr, fit_flr, fit_lr


def _parse_kappa(text: str) -> float:
    if text.strip().lower() == "inf":
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"kappa must be a number or 'inf', got {text!r}")


def _metric(args) -> GroundMetric:
    return GroundMetric(feature_norm=args.norm,
                        kappa_a=_parse_kappa(args.kappa_a),
                        kappa_y=_parse_kappa(args.kappa_y))


def _load_data(args) -> Dataset:
    data = load_dataset_csv(args.data, standardize=args.standardize)
    if args.add_intercept:
        data = add_intercept(data)
    return data


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _manifest(out_dir, command, resolved, files):
    _write_json(os.path.join(out_dir, "manifest.json"),
                {"command": command, "config": resolved, "files": files})


def _json_safe(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return value


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    data = _load_data(args)
    metric = _metric(args)
    ambiguity = AmbiguityConfig(args.rho, metric)
    eta = args.eta if args.eta is not None else default_eta(data)
    if args.method == "lr":
        eta = 0.0
    cfg = TrainConfig(eta, ambiguity, args.tol, args.max_iters)
    if args.method == "lr":
        fit = fit_lr(data, cfg)
    elif args.method == "flr":
        fit = fit_flr(data, cfg)
    else:
        fit = fit_drflr(data, cfg)
    model = {
        "beta": [float(v) for v in fit.weights.beta],
        "method": args.method,
        "config": {
            "eta": eta,
            "rho": args.rho,
            "kappa_a": _json_safe(metric.kappa_a),
            "kappa_y": _json_safe(metric.kappa_y),
            "norm": args.norm,
            "standardize": args.standardize,
            "add_intercept": args.add_intercept,
        },
        "diagnostics": {
            "objective": fit.objective,
            "iterations": fit.iterations,
            "converged": fit.converged,
            "final_tol": fit.final_tol,
        },
    }
    _write_json(args.out, model)
    print(json.dumps(model["diagnostics"]))
    return 0 if fit.converged else 2


def _load_model(path) -> ModelWeights:
    with open(path) as fh:
        payload = json.load(fh)
    if "beta" not in payload:
        raise ConfigError(f"{path}: model file lacks a 'beta' field")
    return ModelWeights(np.asarray(payload["beta"], dtype=float))


def cmd_audit(args) -> int:
    data = _load_data(args)
    beta = _load_model(args.model)
    metric = _metric(args)
    regions = ClassifierRegions.linear(beta, args.tau, args.norm)

    rho_hat = None
    if args.rho_hat:
        rho_hat = fairness_distance(data, regions, metric)

    if args.rho == "sweep":
        grid = np.logspace(math.log10(5e-5), math.log10(5e-1), args.sweep_points)
        payload = {"sweep": [
            audit_report(
                AuditInstance(data, regions, AmbiguityConfig(float(r), metric)),
                rho_hat=rho_hat)
            for r in grid
        ]}
    else:
        rho = float(args.rho)
        inst = AuditInstance(data, regions, AmbiguityConfig(rho, metric))
        payload = audit_report(inst, rho_hat=rho_hat)
    print(json.dumps(payload, indent=2))
    if args.out:
        _write_json(args.out, payload)
    return 0


def cmd_synth(args) -> int:
    spec = SyntheticSpec(scenario=args.scenario, seed=args.seed,
                         n_major=args.n_major, n_minor=args.n_minor, n=args.n)
    data = generate(spec)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "data.csv")
    save_dataset_csv(data, path)
    _manifest(args.out, "synth", {
        "scenario": spec.scenario, "seed": spec.seed, "n_major": spec.n_major,
        "n_minor": spec.n_minor, "n": spec.n,
    }, ["data.csv"])
    print(f"wrote {path} ({data.n} samples)")
    return 0


def cmd_frontier(args) -> int:
    data = _load_data(args)
    from .experiments import stratified_split
    train, test = stratified_split(data, 1.0 - args.test_fraction, args.seed)
    metric = _metric(args)
    eta_max = MarginalStats.from_dataset(train).min_positive_share
    lo = max(1e-4, min(1e-4, eta_max))
    grid = np.logspace(math.log10(lo), math.log10(eta_max), args.eta_points)
    points = pareto_frontier(train, test, grid,
                             AmbiguityConfig(args.rho, metric))
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "frontier.csv")
    with open(csv_path, "w") as fh:
        fh.write("eta,train_loss,train_unfairness,test_loss,"
                 "test_unfairness,accuracy,error\n")
        for pt in points:
            fh.write(f"{pt.eta!r},{pt.train_loss!r},{pt.train_unfairness!r},"
                     f"{pt.test_loss!r},{pt.test_unfairness!r},"
                     f"{pt.accuracy!r},{pt.error or ''}\n")
    files = ["frontier.csv"]
    ok = [pt for pt in points if pt.error is None]
    if ok:
        from .svg import lines_svg
        series = {
            "estimated": [(pt.train_unfairness, pt.train_loss) for pt in ok],
            "actual": [(pt.test_unfairness, pt.test_loss) for pt in ok],
        }
        svg_path = os.path.join(args.out, "frontier.svg")
        with open(svg_path, "w") as fh:
            fh.write(lines_svg(series, title="Pareto frontier",
                               xlabel="unfairness", ylabel="log-loss"))
        files.append("frontier.svg")
        print(f"frontier gap: {frontier_gap(points):.6f}")
    _manifest(args.out, "frontier", {
        "data": args.data, "rho": args.rho,
        "kappa_a": _json_safe(_parse_kappa(args.kappa_a)),
        "kappa_y": _json_safe(_parse_kappa(args.kappa_y)),
        "norm": args.norm, "seed": args.seed,
        "test_fraction": args.test_fraction, "eta_points": args.eta_points,
        "standardize": args.standardize, "add_intercept": args.add_intercept,
    }, files)
    return 0


def cmd_bench(args) -> int:
    report = run_benchmark(args.config, args.out)
    files = [f for f in ("report.json", "metrics.csv", "data.svg")
             if os.path.exists(os.path.join(args.out, f))]
    _manifest(args.out, "bench", {"config_file": args.config}, files)
    if report["errors"]:
        print(json.dumps(report["errors"]), file=sys.stderr)
    for name, metrics in report["methods"].items():
        acc = metrics["accuracy"]
        det = metrics["det_unf"]
        print(f"{name}: accuracy {acc['mean']:.3f} +/- {acc['std']:.3f}, "
              f"det-unf {det['mean']:.3f} +/- {det['std']:.3f}")
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def _add_metric_flags(p):
    p.add_argument("--kappa-a", default="inf", help="attribute cost or 'inf'")
    p.add_argument("--kappa-y", default="inf", help="label cost or 'inf'")
    p.add_argument("--norm", default="l2", choices=("l1", "l2", "linf"))


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="CSV: f1..fp, sensitive, label")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--add-intercept", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairdro",
        description="Robust fair logistic regression and unfairness auditing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and write it as JSON")
    _add_data_flags(p)
    p.add_argument("--method", required=True, choices=("lr", "flr", "drflr"))
    p.add_argument("--eta", type=float, default=None,
                   help="unfairness budget (default: half the minimum "
                        "positive cell share)")
    p.add_argument("--rho", type=float, default=0.0)
    _add_metric_flags(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=30000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("audit", help="audit a saved model on a test CSV")
    _add_data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--rho", default="0.0", help="radius, or 'sweep'")
    p.add_argument("--sweep-points", type=int, default=20)
    _add_metric_flags(p)
    p.add_argument("--rho-hat", action="store_true",
                   help="also compute the fairness distance")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p.add_argument("--scenario", required=True,
                   choices=("boundary", "frontier", "two_moons"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-major", type=int, default=5000)
    p.add_argument("--n-minor", type=int, default=2000)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("frontier", help="sweep the unfairness budget")
    _add_data_flags(p)
    p.add_argument("--rho", type=float, default=0.0)
    _add_metric_flags(p)
    p.add_argument("--eta-points", type=int, default=10)
    p.add_argument("--test-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("bench", help="run a benchmark config")
    p.add_argument("--config", required=True, help="TOML benchmark config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ContractViolation, UndefinedUnfairness, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
