"""Expected scores, divergences and properness reports for forecasts that
move the distribution they are scored against.

Every classical rule lifts to conditional forecasts through
``S(F, a, y) = S'(F(.|a), y)``; the expected performative score integrates
that against the joint law the forecast itself induces.  On top of that sit
the performative divergence, utility and augmented utility scores, the
inverse-probability-weighted score (evaluated in the weight-cancelled form
``sum_a S(F(.|a), P(Y|a))`` over the induced support), grid scans of any of
these metrics, and a classifier that reads properness off a scanned surface.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Callable, Optional, Sequence

from .distributions import (
    ConditionalForecast,
    FiniteDistribution,
    bernoulli,
    binary_forecast,
    total_variation,
)
from .mechanisms import (
    CausalModel,
    Utility,
    action_distribution,
    bayes_act,
    induced_joint,
)
from .scoring import (
    ScoringRule,
    conditional_divergence,
    conditional_entropy,
    conditional_expected_score,
    divergence,
    expected_score,
    rule_by_name,
)

__all__ = [
    "CorrectnessClass",
    "PropernessReport",
    "SurfaceTable",
    "Metric",
    "expected_performative_score",
    "performative_divergence",
    "performative_entropy",
    "correctness_class",
    "utility_score_expected",
    "augmented_utility_score_expected",
    "compute_utility_gap",
    "ipw_expected_score",
    "make_metric",
    "scan_surface",
    "classify_properness",
]

CORRECTNESS_TOL = 1e-9
OPTIMUM_TOL = 1e-9


class CorrectnessClass(str, enum.Enum):
    CORRECT = "correct"
    OBSERVATIONALLY_CORRECT_ONLY = "observationally_correct_only"
    COUNTERFACTUALLY_CORRECT_ONLY = "counterfactually_correct_only"
    INCORRECT = "incorrect"


def expected_performative_score(rule: ScoringRule, cf: ConditionalForecast,
                                model: CausalModel):
    """Expected score of ``cf`` against the joint law it induces."""
    return conditional_expected_score(rule, cf, induced_joint(model, cf))


def performative_entropy(rule: ScoringRule, cf: ConditionalForecast,
                         model: CausalModel):
    """Action-averaged entropy of the induced conditional outcome laws."""
    return conditional_entropy(rule, induced_joint(model, cf))


def performative_divergence(rule: ScoringRule, cf: ConditionalForecast,
                            model: CausalModel):
    """Action-weighted divergence between the forecast slices and the
    induced conditionals; zero at observationally correct forecasts and
    nonnegative whenever the rule is proper."""
    return conditional_divergence(rule, cf, induced_joint(model, cf))


def _slice_flags(cf, model, tol):
    """(supported slices all match, unsupported all match, any unsupported)."""
    joint = induced_joint(model, cf)
    supported_ok, unsupported_ok, has_unsupported = True, True, False
    for a in model.action_space:
        match = total_variation(cf.slice_for(a), joint.conditional(a)) <= tol
        if joint.action_probability(a) > 0:
            supported_ok = supported_ok and match
        else:
            has_unsupported = True
            unsupported_ok = unsupported_ok and match
    return supported_ok, unsupported_ok, has_unsupported


def correctness_class(cf: ConditionalForecast, model: CausalModel,
                      tol: float = CORRECTNESS_TOL) -> CorrectnessClass:
    """Compare the forecast slices against the induced conditionals, split
    by whether the action can actually be observed under the forecast.

    When every action is supported there is nothing counterfactual to be
    right about, so the only reachable labels are ``correct`` and
    ``incorrect``.
    """
    supported_ok, unsupported_ok, has_unsupported = _slice_flags(cf, model, tol)
    if supported_ok and unsupported_ok:
        return CorrectnessClass.CORRECT
    if supported_ok:
        return CorrectnessClass.OBSERVATIONALLY_CORRECT_ONLY
    if unsupported_ok and has_unsupported:
        return CorrectnessClass.COUNTERFACTUALLY_CORRECT_ONLY
    return CorrectnessClass.INCORRECT


def utility_score_expected(u: Utility, cf: ConditionalForecast,
                           model: CausalModel):
    """Expected payoff ``sum_{a,y} U(a, y) P(a, y)`` under the induced joint.

    Under a deterministic best-response mechanism this equals the expected
    performative score of the rule ``S(F, a, y) = U(a_F, y)``.
    """
    joint = induced_joint(model, cf)
    total = 0
    for a in joint.support:
        cond = joint.conditional(a)
        inner = sum(p * u.value(a, y)
                    for y, p in zip(cond.support, cond.probabilities))
        total += joint.action_probability(a) * inner
    return total


def _utility_gap_with_pair(u: Utility, model: CausalModel):
    if not model.kernel.forecast_invariant:
        raise ValueError("utility gap needs a forecast-invariant kernel")
    means = {}
    for a in model.action_space:
        cond = model.kernel.per_action[a]
        means[a] = sum(p * u.value(a, y)
                       for y, p in zip(cond.support, cond.probabilities))
    best, best_pair = math.inf, None
    actions = list(model.action_space)
    for i, a in enumerate(actions):
        for b in actions[i + 1:]:
            gap = abs(means[a] - means[b])
            if gap < best:
                best, best_pair = gap, (a, b)
    return best, best_pair


def compute_utility_gap(u: Utility, model: CausalModel):
    """Minimum pairwise gap of action-conditional expected utilities;
    ``+inf`` for a single action (empty minimum)."""
    gap, _ = _utility_gap_with_pair(u, model)
    return gap


def augmented_utility_score_expected(u: Utility, inner_rule: ScoringRule,
                                     delta, cf: ConditionalForecast,
                                     model: CausalModel):
    """Expected value of ``U(a_F, y) + delta * S'(F(.|a_F), y)`` under the
    induced joint, where ``a_F`` is the forecast's best-response action.

    Requires utilities and the inner rule in [0, 1] and a utility gap
    exceeding ``delta``, which is what keeps the added rule from ever making
    a utility-suboptimal action worth inducing.
    """
    if not u.in_unit_interval():
        raise ValueError("utility values must lie in [0, 1]")
    bounds = inner_rule.range_bounds
    if bounds is None or bounds[0] < 0 or bounds[1] > 1:
        raise ValueError(
            f"inner rule {inner_rule.name!r} must have range within [0, 1]")
    gap, pair = _utility_gap_with_pair(u, model)
    if not gap > delta:
        raise ValueError(
            f"utility gap {float(gap)} (actions {pair!r}) does not exceed "
            f"delta {float(delta)}")
    a_star = bayes_act(u, cf)
    joint = induced_joint(model, cf)
    total = 0
    for a in joint.support:
        cond = joint.conditional(a)
        inner = sum(
            p * (u.value(a_star, y) + delta * inner_rule.score(cf.slice_for(a_star), y))
            for y, p in zip(cond.support, cond.probabilities))
        total += joint.action_probability(a) * inner
    return total


def ipw_expected_score(rule: ScoringRule, cf: ConditionalForecast,
                       model: CausalModel):
    """Inverse-probability-weighted expected score in the cancelled form
    ``sum_a S(F(.|a), P(Y|a))`` over actions in the induced support.

    Zero-probability actions contribute nothing, which is exactly what makes
    the method improper without positivity."""
    joint = induced_joint(model, cf)
    total = 0
    for a in joint.support:
        total += expected_score(rule, cf.slice_for(a), joint.conditional(a))
    return total


@dataclass(frozen=True)
class Metric:
    """A named map (forecast, model) -> real with an optimisation sense."""

    name: str
    orientation: str  # "max" or "min"
    evaluate: Callable

    def __call__(self, cf, model):
        return self.evaluate(cf, model)


def make_metric(name: str, utility: Optional[Utility] = None,
                delta=0.2) -> Metric:
    """Resolve a metric from its config string.

    Recognised forms: ``<rule>_score`` (e.g. ``brier_score``),
    ``divergence:<rule>``, ``ipw:<rule>``, ``utility`` and
    ``utility+delta:<rule>`` (inner rule rescaled into [0, 1] when needed).
    """
    if name.endswith("_score"):
        rule = rule_by_name(name[: -len("_score")])
        return Metric(name, "max",
                      lambda cf, model: expected_performative_score(rule, cf, model))
    if name.startswith("divergence:"):
        rule = rule_by_name(name.split(":", 1)[1])
        return Metric(name, "min",
                      lambda cf, model: performative_divergence(rule, cf, model))
    if name.startswith("ipw:"):
        rule = rule_by_name(name.split(":", 1)[1])
        return Metric(name, "max",
                      lambda cf, model: ipw_expected_score(rule, cf, model))
    if name == "utility":
        if utility is None:
            raise ValueError("metric 'utility' needs a utility table")
        return Metric(name, "max",
                      lambda cf, model: utility_score_expected(utility, cf, model))
    if name.startswith("utility+delta:"):
        if utility is None:
            raise ValueError(f"metric {name!r} needs a utility table")
        inner_name = name.split(":", 1)[1]
        inner = rule_by_name("brier-unit" if inner_name == "brier" else inner_name)
        return Metric(
            name, "max",
            lambda cf, model: augmented_utility_score_expected(
                utility, inner, delta, cf, model))
    raise ValueError(f"unknown metric {name!r}")


@dataclass(frozen=True)
class SurfaceRow:
    coords: tuple          # forecast slice summaries, one per action
    value: float
    action_probs: tuple    # induced action distribution at this grid point


@dataclass(frozen=True)
class SurfaceTable:
    """Metric values on a full grid over [0, 1]^|A| of binary slice summaries."""

    metric: str
    orientation: str
    resolution: int
    action_space: tuple
    rows: tuple

    def values(self):
        return [r.value for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"f_a{i}" for i in range(len(self.action_space))]
                        + ["value", "action_probs"])
        for row in self.rows:
            writer.writerow(
                [repr(float(c)) for c in row.coords]
                + [repr(float(row.value)),
                   "|".join(repr(float(p)) for p in row.action_probs)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, metric: str = "", orientation: str = "max"):
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        k = len([h for h in header if h.startswith("f_a")])
        rows = []
        for parts in reader:
            coords = tuple(float(x) for x in parts[:k])
            value = float(parts[k])
            probs = tuple(float(x) for x in parts[k + 1].split("|"))
            rows.append(SurfaceRow(coords, value, probs))
        resolution = round(len(rows) ** (1 / k)) if rows else 0
        return cls(metric, orientation, resolution, tuple(range(k)), tuple(rows))


def grid_axis(resolution: int, offset: bool = False):
    """Evaluation points on [0, 1]: the plain grid includes the endpoints and
    any decision thresholds that happen to lie on it; ``offset`` shifts all
    points by half a step to dodge such boundaries."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if offset:
        return [(i + 0.5) / resolution for i in range(resolution)]
    return [i / (resolution - 1) for i in range(resolution)]


def scan_surface(metric: Metric, model: CausalModel, resolution: int = 201,
                 offset: bool = False, threads: int = 1) -> SurfaceTable:
    """Evaluate ``metric`` exactly at every grid point of [0, 1]^|A|.

    Outcomes must be binary; each grid point is an independent evaluation, so
    rows come out identical regardless of ``threads``.
    """
    if set(model.outcome_space) != {0, 1}:
        raise ValueError("surface scans need a binary outcome space")
    axis = grid_axis(resolution, offset)
    k = len(model.action_space)

    def evaluate(coords):
        cf = ConditionalForecast(
            model.action_space,
            {a: bernoulli(f) for a, f in zip(model.action_space, coords)})
        value = metric.evaluate(cf, model)
        probs = action_distribution(model, cf).probabilities
        return SurfaceRow(coords, value, tuple(float(p) for p in probs))

    points = list(product(*([axis] * k)))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(evaluate, points, chunksize=256))
    else:
        rows = [evaluate(p) for p in points]
    return SurfaceTable(metric.name, metric.orientation, resolution,
                        model.action_space, tuple(rows))


@dataclass(frozen=True)
class PropernessReport:
    """Summary of which grid optimisers of a metric are correct forecasts.

    ``maximizers`` holds the optimising grid points regardless of the
    metric's sense (minimisers for divergence metrics).  Strictness on a grid
    is necessarily relative to the recorded resolution and tolerance.
    """

    metric: str
    observationally_proper: bool
    observationally_strictly_proper: bool
    counterfactually_proper: bool
    counterfactually_strictly_proper: bool
    proper: bool
    strictly_proper: bool
    maximizers: tuple
    correct_forecast: Optional[tuple]
    grid_resolution: int
    tolerance: float
    optimum: float

    def to_json(self) -> str:
        payload = {
            "metric": self.metric,
            "observationally_proper": self.observationally_proper,
            "observationally_strictly_proper": self.observationally_strictly_proper,
            "counterfactually_proper": self.counterfactually_proper,
            "counterfactually_strictly_proper": self.counterfactually_strictly_proper,
            "proper": self.proper,
            "strictly_proper": self.strictly_proper,
            "maximizers": [list(map(float, m)) for m in self.maximizers],
            "correct_forecast": (
                None if self.correct_forecast is None
                else [float(x) for x in self.correct_forecast]),
            "grid_resolution": self.grid_resolution,
            "tolerance": self.tolerance,
            "optimum": float(self.optimum),
        }
        return json.dumps(payload, indent=2)


def _known_correct_forecast(model: CausalModel) -> Optional[tuple]:
    if not model.kernel.forecast_invariant:
        return None
    coords = []
    for a in model.action_space:
        cond = model.kernel.per_action[a]
        if not (isinstance(cond, FiniteDistribution) and cond.is_binary):
            return None
        coords.append(float(cond.prob(1)))
    return tuple(coords)


def classify_properness(surface: SurfaceTable, model: CausalModel,
                        tolerance: float = OPTIMUM_TOL) -> PropernessReport:
    """Locate the surface's optimisers and classify each for correctness.

    Observational (counterfactual) properness asks for an optimiser whose
    supported (unsupported) slices are all correct; the strict variants ask
    it of every optimiser.  A counterfactual claim is only credited through a
    genuinely unsupported slice or a fully correct optimiser, so full-support
    mechanisms cannot pass vacuously.
    """
    if not surface.rows:
        raise ValueError("empty surface")
    values = surface.values()
    optimum = max(values) if surface.orientation == "max" else min(values)
    optimisers = [row for row in surface.rows
                  if abs(row.value - optimum) <= tolerance]

    obs_ok, cf_ok, full_ok = [], [], []
    for row in optimisers:
        cf = ConditionalForecast(
            model.action_space,
            {a: bernoulli(f) for a, f in zip(model.action_space, row.coords)})
        supported_ok, unsupported_ok, has_unsupported = _slice_flags(
            cf, model, CORRECTNESS_TOL)
        fully = supported_ok and unsupported_ok
        obs_ok.append(supported_ok)
        cf_ok.append(fully or (unsupported_ok and has_unsupported))
        full_ok.append(fully)

    return PropernessReport(
        metric=surface.metric,
        observationally_proper=any(obs_ok),
        observationally_strictly_proper=all(obs_ok),
        counterfactually_proper=any(cf_ok),
        counterfactually_strictly_proper=all(cf_ok),
        proper=any(full_ok),
        strictly_proper=all(full_ok),
        maximizers=tuple(row.coords for row in optimisers),
        correct_forecast=_known_correct_forecast(model),
        grid_resolution=surface.resolution,
        tolerance=tolerance,
        optimum=optimum,
    )
