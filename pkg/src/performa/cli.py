"""Batch command line: canonical example tables, surface scans with
properness reports, estimator experiments, retraining runs and separation
queries.

Exit codes: 0 success (or `separated` for dsep), 1 `connected` (dsep only),
2 usage or config errors, 3 I/O errors.  All output is deterministic given
flags and seed; PERFORMA_THREADS caps internal parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from .distributions import binary_forecast
from .estimators import ExperimentConfig, run_estimator_experiment
from .fixtures import FIXTURES, fixture, graph_fixture, load_model, model_from_dict
from .graphs import SeparationQuery, d_separated, graph_from_json
from .mechanisms import CausalModel
from .performative import (
    classify_properness,
    correctness_class,
    expected_performative_score,
    make_metric,
    scan_surface,
)
from .retraining import SaturatedTableFamily, run_retraining
from .scoring import brier_rule, rule_by_name

DEFAULT_SEED = 20240101
DEFAULT_RESOLUTION = 201
DEFAULT_NS = (2, 3, 4, 5, 6, 7, 8, 9, 10, 21, 46)
DEFAULT_ESTIMATORS = ("unbiased:brier", "plugin:brier", "ipw:brier")


def _threads() -> int:
    raw = os.environ.get("PERFORMA_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _format_number(value) -> str:
    """12 significant digits, plus the exact rational when there is one."""
    if isinstance(value, (int, Fraction)):
        return f"{float(value):.12g} (= {Fraction(value)})"
    return f"{float(value):.12g}"


def _load_fixture_or_model(args):
    if getattr(args, "model", None):
        return None, load_model(args.model)
    fx = fixture(args.fixture)
    return fx, fx.model


def cmd_example(args) -> int:
    fx = fixture(args.fixture)
    rule = brier_rule()
    rows = []
    for label, cf in fx.forecasts:
        score = expected_performative_score(rule, cf, fx.model)
        rows.append({
            "label": label,
            "f": [float(cf.slice_for(a).prob(1)) for a in fx.model.action_space],
            "expected_brier_score": float(score),
            "exact": str(Fraction(score)) if isinstance(score, (int, Fraction)) else None,
            "correctness": correctness_class(cf, fx.model).value,
        })
    utilities = None
    if fx.utility is not None:
        utilities = {}
        for a in fx.model.action_space:
            cond = fx.model.kernel.per_action[a]
            utilities[str(a)] = float(sum(
                p * fx.utility.value(a, y)
                for y, p in zip(cond.support, cond.probabilities)))

    if args.format == "json":
        payload = {"fixture": fx.name, "rows": rows}
        if utilities is not None:
            payload["expected_utility_per_action"] = utilities
        text = json.dumps(payload, indent=2)
        print(text)
    else:
        print(f"fixture: {fx.name}")
        print(f"  {fx.description}")
        for label, cf in fx.forecasts:
            score = expected_performative_score(rule, cf, fx.model)
            cls = correctness_class(cf, fx.model).value
            coords = ", ".join(
                _format_number(cf.slice_for(a).prob(1))
                for a in fx.model.action_space)
            print(f"  {label:>10}: f = ({coords})")
            print(f"{'':>12}  expected brier score = {_format_number(score)}")
            print(f"{'':>12}  correctness = {cls}")
        if utilities is not None:
            pairs = ", ".join(f"{v:.12g} at a={a}" for a, v in utilities.items())
            print(f"  expected utility per action: {pairs}")
    if args.out:
        payload = {"fixture": fx.name, "rows": rows}
        if utilities is not None:
            payload["expected_utility_per_action"] = utilities
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n",
                                  encoding="utf-8")
    return 0


def cmd_surface(args) -> int:
    fx, model = _load_fixture_or_model(args)
    metric = make_metric(args.metric,
                         utility=fx.utility if fx else None,
                         delta=args.delta)
    surface = scan_surface(metric, model, resolution=args.resolution,
                           offset=args.offset, threads=_threads())
    report = classify_properness(surface, model, tolerance=args.tolerance)
    out = Path(args.out)
    out.write_text(surface.to_csv(), encoding="utf-8")
    report_path = args.report or str(out.with_suffix("")) + ".report.json"
    Path(report_path).write_text(report.to_json() + "\n", encoding="utf-8")
    print(f"surface: {out}")
    print(f"report:  {report_path}")
    for key in ("observationally_proper", "observationally_strictly_proper",
                "counterfactually_proper", "proper", "strictly_proper"):
        print(f"  {key} = {getattr(report, key)}")
    return 0


def _validate_estimate_config(payload) -> ExperimentConfig:
    def fail(path, message):
        raise ValueError(f"config field {path}: {message}")

    if not isinstance(payload, dict):
        raise ValueError("config must be a JSON object")
    if "model" in payload:
        model = model_from_dict(payload["model"])
    else:
        name = payload.get("fixture")
        if not isinstance(name, str):
            fail("fixture", "expected a fixture name or an inline model")
        model = fixture(name).model
    forecasts = []
    raw = payload.get("forecasts")
    if not isinstance(raw, list) or not raw:
        fail("forecasts", "expected a nonempty list")
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or "label" not in item or "f" not in item:
            fail(f"forecasts[{i}]", "expected {label, f}")
        probs = item["f"]
        if (not isinstance(probs, list)
                or len(probs) != len(model.action_space)
                or not all(isinstance(x, (int, float)) for x in probs)):
            fail(f"forecasts[{i}].f",
                 f"expected {len(model.action_space)} slice probabilities")
        forecasts.append((item["label"], binary_forecast(*probs)))
    ns = payload.get("ns", list(DEFAULT_NS))
    if not isinstance(ns, list) or not all(
            isinstance(x, int) and x >= 1 for x in ns):
        fail("ns", "expected a list of positive integers")
    replications = payload.get("replications", 10000)
    if not isinstance(replications, int) or replications < 1:
        fail("replications", "expected a positive integer")
    seed = payload.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int):
        fail("seed", "expected an integer")
    estimators = payload.get("estimators", list(DEFAULT_ESTIMATORS))
    if not isinstance(estimators, list) or not estimators:
        fail("estimators", "expected a nonempty list of estimator names")
    return ExperimentConfig(model, forecasts, ns, replications, seed, estimators)


def default_estimate_config(replications: int = 10000,
                            seed: int = DEFAULT_SEED) -> ExperimentConfig:
    """Exploration-mixture model, one correct and one off forecast, the
    standard sample-size ladder."""
    fx = fixture("example-E.3")
    forecasts = tuple((label, cf) for label, cf in fx.forecasts
                      if label in ("correct", "off"))
    return ExperimentConfig(fx.model, forecasts, DEFAULT_NS, replications,
                            seed, DEFAULT_ESTIMATORS)


def cmd_estimate(args) -> int:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"config is not valid JSON: {exc}") from exc
        config = _validate_estimate_config(payload)
        if args.replications:
            config = ExperimentConfig(
                config.model, config.forecasts, config.ns,
                args.replications, args.seed or config.seed, config.estimators)
    else:
        config = default_estimate_config(
            replications=args.replications or 10000,
            seed=args.seed or DEFAULT_SEED)
    summary = run_estimator_experiment(config)
    text = summary.to_csv()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"summary: {args.out} ({len(summary.rows)} rows)")
    else:
        sys.stdout.write(text)
    return 0


def cmd_retrain(args) -> int:
    fx, model = _load_fixture_or_model(args)
    theta0 = tuple(float(x) for x in args.theta0.split(","))
    if len(theta0) != len(model.action_space):
        raise ValueError(
            f"theta0 needs {len(model.action_space)} components, "
            f"got {len(theta0)}")
    metric, _, rule_name = args.metric.partition(":")
    if metric not in ("divergence", "neg_score"):
        raise ValueError(
            f"retraining metric must be divergence:<rule> or neg_score:<rule>, "
            f"got {args.metric!r}")
    rule = rule_by_name(rule_name or "brier")
    family = SaturatedTableFamily(model.action_space)
    trajectory = run_retraining(metric, rule, theta0, family, model,
                                max_steps=args.max_steps, tol=args.tol)
    text = trajectory.to_csv()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"trajectory: {args.out}")
    else:
        sys.stdout.write(text)
    if trajectory.stable_at is not None:
        print(f"stable at step {trajectory.stable_at}")
    else:
        print("did not stabilise within the step budget")
    return 0


def cmd_dsep(args) -> int:
    if args.model:
        with open(args.model, "r", encoding="utf-8") as fh:
            graph = graph_from_json(fh.read())
    else:
        graph = graph_fixture(args.fixture)
    given = tuple(x for x in (args.given.split(",") if args.given else []) if x)
    query = SeparationQuery({args.a}, {args.b}, given)
    separated = d_separated(graph, query)
    print("separated" if separated else "connected")
    return 0 if separated else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="performa",
        description="score, elicit and estimate outcome-moving forecasts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("example", help="canonical scores for a fixture")
    p.add_argument("--fixture", required=True)
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("--out", help="also write the JSON payload here")
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("surface", help="scan a metric over the forecast grid")
    p.add_argument("--fixture")
    p.add_argument("--model", help="model config JSON path (overrides --fixture)")
    p.add_argument("--metric", default="brier_score")
    p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    p.add_argument("--offset", action="store_true",
                   help="shift grid points off decision boundaries")
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--delta", type=float, default=0.2,
                   help="weight of the inner rule in utility+delta metrics")
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="properness report path "
                                    "(default: <out>.report.json)")
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("estimate", help="replicated estimator experiment")
    p.add_argument("--config", help="experiment config JSON path")
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("retrain", help="iterate decoupled-risk minimisation")
    p.add_argument("--fixture")
    p.add_argument("--model")
    p.add_argument("--theta0", required=True,
                   help="comma-separated slice probabilities")
    p.add_argument("--metric", default="divergence:brier")
    p.add_argument("--max-steps", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out")
    p.set_defaults(func=cmd_retrain)

    p = sub.add_parser("dsep", help="d-separation query on a graph")
    p.add_argument("--fixture")
    p.add_argument("--model", help="graph JSON path (overrides --fixture)")
    p.add_argument("--a", required=True, help="first vertex")
    p.add_argument("--b", required=True, help="second vertex")
    p.add_argument("--given", default="", help="comma-separated conditioning set")
    p.set_defaults(func=cmd_dsep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "fixture", None) is None and getattr(args, "model", None) is None \
            and args.command in ("surface", "retrain", "dsep"):
        print("error: provide --fixture or --model", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entry()
