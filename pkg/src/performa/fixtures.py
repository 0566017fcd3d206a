"""Built-in models and graphs addressable by name from the CLI and tests.

All numeric parameters are rational, so expected scores computed through the
pure-Python scoring path come out as exact fractions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

from .distributions import (
    ConditionalForecast,
    FiniteDistribution,
    bernoulli,
    distribution_from_dict,
)
from .graphs import Admg
from .mechanisms import (
    ArgmaxRule,
    BayesActRule,
    CausalModel,
    ForecastPredicate,
    MixtureWithUniform,
    OutcomeKernel,
    TableRule,
    ThresholdRule,
    Utility,
    construct_impossibility_model,
    impossibility_forecasts,
)
from .scoring import brier_rule

__all__ = ["Fixture", "FIXTURES", "GRAPHS", "fixture", "graph_fixture",
           "model_from_dict", "model_to_dict"]


@dataclass(frozen=True)
class Fixture:
    """A model plus its canonical labelled forecasts (and, where the
    mechanism is utility-driven, the utility itself)."""

    name: str
    description: str
    model: CausalModel
    forecasts: tuple                 # of (label, ConditionalForecast)
    utility: Optional[Utility] = None


def _frac(num, den) -> Fraction:
    return Fraction(num, den)


def _exact_binary_cf(*slice_probs) -> ConditionalForecast:
    actions = tuple(range(len(slice_probs)))
    return ConditionalForecast(
        actions, {a: bernoulli(p) for a, p in zip(actions, slice_probs)})


def _base_kernel() -> OutcomeKernel:
    # Hard-to-predict slice for action 0, easy one for action 1.
    return OutcomeKernel({0: bernoulli(_frac(1, 2)), 1: bernoulli(_frac(1, 4))})


def _argmax_fixture() -> Fixture:
    model = CausalModel((0, 1), (0, 1), _base_kernel(), ArgmaxRule())
    return Fixture(
        "example-3.1",
        "argmax decision rule over the reported slices; misreporting the "
        "unobserved slice steers the agent to the easier action",
        model,
        (
            ("correct", _exact_binary_cf(_frac(1, 2), _frac(1, 4))),
            ("misreport", _exact_binary_cf(_frac(1, 5), _frac(1, 4))),
        ),
    )


def _threshold_fixture() -> Fixture:
    model = CausalModel((0, 1), (0, 1), _base_kernel(), ThresholdRule(0.4, 0.4))
    return Fixture(
        "example-E.2",
        "self-defeating threshold rule: action 1 fires exactly when the "
        "slice-0 report is <= 0.4 and the slice-1 report is >= 0.4",
        model,
        (
            ("correct", _exact_binary_cf(_frac(1, 2), _frac(1, 4))),
            ("misreport", _exact_binary_cf(_frac(2, 5), _frac(2, 5))),
        ),
    )


def _exploration_fixture() -> Fixture:
    mechanism = MixtureWithUniform(_frac(1, 3), ThresholdRule(0.4, 0.4))
    model = CausalModel((0, 1), (0, 1), _base_kernel(), mechanism)
    return Fixture(
        "example-E.3",
        "threshold rule softened by uniform exploration with probability "
        "1/3, so every action keeps probability at least 1/6",
        model,
        (
            ("correct", _exact_binary_cf(_frac(1, 2), _frac(1, 4))),
            ("misreport", _exact_binary_cf(_frac(2, 5), _frac(2, 5))),
            ("off", _exact_binary_cf(_frac(7, 10), _frac(9, 20))),
        ),
    )


def _utility_fixture() -> Fixture:
    utility = Utility.from_rows((0, 1), (0, 1), [[0, 1], [0, 1]])  # U(a, y) = y
    model = CausalModel((0, 1), (0, 1), _base_kernel(), BayesActRule(utility))
    return Fixture(
        "example-4.1",
        "agent takes the best-response action for the payoff U(a, y) = y",
        model,
        (
            ("correct", _exact_binary_cf(_frac(1, 2), _frac(1, 4))),
            ("misreport", _exact_binary_cf(_frac(1, 5), _frac(1, 4))),
        ),
        utility=utility,
    )


def _impossibility_fixture(variant: str) -> Fixture:
    p0, p1 = bernoulli(_frac(1, 2)), bernoulli(_frac(1, 4))
    f_tilde = bernoulli(_frac(2, 5))
    q = FiniteDistribution((0, 1), (_frac(1, 2), _frac(1, 2)))
    model = construct_impossibility_model(
        brier_rule(), p0, p1, f_tilde,
        variant=variant, q=q if variant == "full_support" else None)
    correct, misreport = impossibility_forecasts(p0, p1, f_tilde)
    name = "thm-3.1-det" if variant == "deterministic" else "thm-3.1-pos"
    flavour = ("deterministic action choice" if variant == "deterministic"
               else "stochastic action choice with full support")
    return Fixture(
        name,
        f"self-defeating construction ({flavour}) under which the strictly "
        "proper squared-error rule pays more for a misreport",
        model,
        (("correct", correct), ("misreport", misreport)),
    )


def _self_defeating_fixture() -> Fixture:
    # Single action; the outcome kernel flips whenever the forecast crosses
    # one half, so no correct forecast exists and retraining oscillates.
    kernel = OutcomeKernel(
        {0: bernoulli(_frac(9, 10))},
        overrides=(
            (ForecastPredicate("slice_ge", action=0, threshold=0.5),
             {0: bernoulli(_frac(1, 10))}),
        ),
    )
    mechanism = TableRule(clauses=(), default=FiniteDistribution((0,), (1,)))
    model = CausalModel((0,), (0, 1), kernel, mechanism)
    return Fixture(
        "self-defeating",
        "forecast-dependent kernel that contradicts whatever is announced; "
        "retraining oscillates and never stabilises",
        model,
        (
            ("high", ConditionalForecast((0,), {0: bernoulli(_frac(9, 10))})),
            ("low", ConditionalForecast((0,), {0: bernoulli(_frac(1, 10))})),
        ),
    )


def _build_fixtures() -> dict:
    fixtures = [
        _argmax_fixture(),
        _threshold_fixture(),
        _exploration_fixture(),
        _utility_fixture(),
        _impossibility_fixture("deterministic"),
        _impossibility_fixture("full_support"),
        _self_defeating_fixture(),
    ]
    return {f.name: f for f in fixtures}


FIXTURES = _build_fixtures()


def fixture(name: str) -> Fixture:
    try:
        return FIXTURES[name]
    except KeyError:
        known = ", ".join(sorted(FIXTURES))
        raise ValueError(f"unknown fixture {name!r}; known fixtures: {known}") \
            from None


def _build_graphs() -> dict:
    graphs = {
        # Marginal forecast directly driving the outcome.
        "figure-1a": Admg(("F", "Y"), [("F", "Y")]),
        # Conditional forecast: forecast drives the action and the outcome,
        # with confounding between action and outcome.
        "figure-2a": Admg(
            ("F", "A", "Y"),
            [("F", "A"), ("A", "Y"), ("F", "Y")],
            [("A", "Y")],
        ),
        # Mediating actions with two latent paths into the outcome.
        "figure-5a": Admg(
            ("F", "A1", "A2", "A3", "L1", "L2", "Y"),
            [("F", "A1"), ("L1", "A2"), ("L1", "Y"), ("A2", "A1"),
             ("F", "A3"), ("A3", "L2"), ("L2", "Y"), ("A1", "Y"), ("A2", "Y")],
        ),
        # Its latent projection onto the named variables.
        "figure-5b": Admg(
            ("F", "A1", "A2", "A3", "Y"),
            [("F", "A1"), ("A2", "A1"), ("F", "A3"), ("A3", "Y"),
             ("A1", "Y"), ("A2", "Y")],
            [("A2", "Y")],
        ),
        # The mediators merged into a single action vertex.
        "figure-5c": Admg(
            ("F", "A", "Y"),
            [("F", "A"), ("A", "Y")],
            [("A", "Y")],
        ),
    }
    return graphs


GRAPHS = _build_graphs()


def graph_fixture(name: str) -> Admg:
    try:
        return GRAPHS[name]
    except KeyError:
        known = ", ".join(sorted(GRAPHS))
        raise ValueError(f"unknown graph fixture {name!r}; known: {known}") \
            from None


# --- model (de)serialisation -------------------------------------------------


def _mechanism_from_dict(payload: Mapping):
    kind = payload.get("kind")
    if kind == "argmax_rule":
        return ArgmaxRule()
    if kind == "threshold_rule":
        return ThresholdRule(payload["low"], payload["high"])
    if kind == "mixture_with_uniform":
        return MixtureWithUniform(payload["epsilon"],
                                  _mechanism_from_dict(payload["inner"]))
    if kind == "table_rule":
        clauses = tuple(
            (_predicate_from_dict(c["when"]),
             distribution_from_dict(c["dist"]))
            for c in payload.get("clauses", ()))
        return TableRule(clauses, distribution_from_dict(payload["default"]))
    if kind == "bayes_act":
        table = {(a, y): v for a, y, v in payload["utility"]["table"]}
        return BayesActRule(Utility(table))
    raise ValueError(f"unknown mechanism kind {kind!r}")


def _predicate_from_dict(payload: Mapping) -> ForecastPredicate:
    target = payload.get("target")
    return ForecastPredicate(
        payload["kind"], payload["action"],
        target=distribution_from_dict(target) if target else None,
        threshold=payload.get("threshold"),
        tol=payload.get("tol", 1e-9),
    )


def model_from_dict(payload: Mapping) -> CausalModel:
    """Build a model from the config schema
    ``{"actions": [...], "outcomes": [...], "kernel": {...}, "mechanism": {...}}``."""
    try:
        actions = tuple(payload["actions"])
        outcomes = tuple(payload["outcomes"])
        kernel_payload = payload["kernel"]
        slices = [distribution_from_dict(s) for s in kernel_payload["slices"]]
        overrides = tuple(
            (_predicate_from_dict(o["when"]),
             {a: distribution_from_dict(d)
              for a, d in zip(actions, o["slices"]) if d is not None})
            for o in kernel_payload.get("overrides", ()))
        kernel = OutcomeKernel(dict(zip(actions, slices)), overrides)
        mechanism = _mechanism_from_dict(payload["mechanism"])
    except KeyError as exc:
        raise ValueError(f"model config missing field {exc}") from exc
    return CausalModel(actions, outcomes, kernel, mechanism)


def model_to_dict(model: CausalModel) -> dict:
    kernel = {
        "slices": [model.kernel.per_action[a].to_dict()
                   for a in model.action_space],
    }
    if model.kernel.overrides:
        kernel["overrides"] = [
            {"when": pred.to_dict(),
             "slices": [slices.get(a).to_dict() if a in slices else None
                        for a in model.action_space]}
            for pred, slices in model.kernel.overrides
        ]
    return {
        "actions": list(model.action_space),
        "outcomes": list(model.outcome_space),
        "kernel": kernel,
        "mechanism": model.mechanism.to_dict(),
    }


def load_model(path: str) -> CausalModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
