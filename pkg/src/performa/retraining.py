"""Risk of a parametrised forecast against its own induced distribution, and
the retraining recursion that minimises the decoupled risk.

The decoupled risk scores a candidate parameter against the distribution the
*previous* parameter induces; its diagonal recovers the performative risk.
For a saturated table family the minimiser has a closed form: every supported
action's slice becomes the induced conditional, and unsupported slices carry
over unchanged (the risk is flat there, and carrying over keeps the step
deterministic).  Under a full-support mechanism and a forecast-invariant
kernel one step lands on the correct parameter and stays there.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .distributions import (
    ConditionalForecast,
    FiniteDistribution,
    bernoulli,
    total_variation,
)
from .mechanisms import CausalModel, induced_joint
from .performative import expected_performative_score, performative_divergence
from .scoring import ScoringRule, divergence, expected_score

__all__ = [
    "ParametricFamily",
    "SaturatedTableFamily",
    "GridFamily",
    "LogisticLinkFamily",
    "Trajectory",
    "performative_risk",
    "decoupled_risk",
    "retrain_step",
    "run_retraining",
]

STABILITY_TOL = 1e-9


class ParametricFamily:
    """Maps parameters to conditional forecasts."""

    kind = "abstract"

    def to_forecast(self, theta) -> ConditionalForecast:
        raise NotImplementedError


@dataclass(frozen=True)
class SaturatedTableFamily(ParametricFamily):
    """One Bernoulli success probability per action: theta in [0, 1]^|A|."""

    action_space: tuple
    kind = "saturated_table"

    def to_forecast(self, theta):
        theta = tuple(theta)
        if len(theta) != len(self.action_space):
            raise ValueError("parameter length must match the action space")
        return ConditionalForecast(
            self.action_space,
            {a: bernoulli(t) for a, t in zip(self.action_space, theta)})


@dataclass(frozen=True)
class GridFamily(ParametricFamily):
    """Explicit finite parameter grid with a user-supplied forecast map.

    The grid may be unable to represent the kernel; retraining then settles
    on best-in-class fixed points without any correctness claim.
    """

    action_space: tuple
    points: tuple
    forecast_fn: Callable
    kind: str = "custom_grid"

    def to_forecast(self, theta):
        return self.forecast_fn(theta)


def _sigmoid(x: float) -> float:
    return 1 / (1 + math.exp(-x))


def logistic_forecast(action_space, theta) -> ConditionalForecast:
    """Slices ``sigmoid(theta0 + theta1 * a)`` over numeric actions."""
    t0, t1 = theta
    return ConditionalForecast(
        tuple(action_space),
        {a: bernoulli(_sigmoid(t0 + t1 * a)) for a in action_space})


def LogisticLinkFamily(action_space, points) -> GridFamily:
    """Two-parameter logistic link over a declared parameter grid."""
    return GridFamily(tuple(action_space), tuple(tuple(p) for p in points),
                      lambda theta: logistic_forecast(action_space, theta),
                      kind="logistic_link")


def _metric_value(metric: str, rule: ScoringRule, cf, model):
    if metric == "neg_score":
        return -expected_performative_score(rule, cf, model)
    if metric == "divergence":
        return performative_divergence(rule, cf, model)
    raise ValueError(f"unknown risk metric {metric!r}")


def performative_risk(metric: str, rule: ScoringRule, theta,
                      family: ParametricFamily, model: CausalModel):
    """Risk of ``theta``'s forecast against the distribution it induces:
    negative expected score or divergence."""
    return _metric_value(metric, rule, family.to_forecast(theta), model)


def decoupled_risk(metric: str, rule: ScoringRule, theta_next, theta_t,
                   family: ParametricFamily, model: CausalModel):
    """Risk of ``theta_next``'s forecast against the distribution induced by
    ``theta_t``'s; equals the performative risk on the diagonal."""
    cf_next = family.to_forecast(theta_next)
    joint = induced_joint(model, family.to_forecast(theta_t))
    total = 0
    for a in joint.support:
        weight = joint.action_probability(a)
        cond = joint.conditional(a)
        if metric == "neg_score":
            total += weight * -expected_score(rule, cf_next.slice_for(a), cond)
        elif metric == "divergence":
            d = divergence(rule, cf_next.slice_for(a), cond)
            if math.isinf(d):
                return math.inf
            total += weight * d
        else:
            raise ValueError(f"unknown risk metric {metric!r}")
    return total


def retrain_step(metric: str, rule: ScoringRule, theta_t,
                 family: ParametricFamily, model: CausalModel):
    """Minimise the decoupled risk over the family.

    Saturated tables use the closed form (supported slices become the
    induced conditionals); grid families take an exhaustive argmin with ties
    broken by the lowest grid index.
    """
    if isinstance(family, SaturatedTableFamily):
        joint = induced_joint(model, family.to_forecast(theta_t))
        theta_next = []
        for a, current in zip(family.action_space, theta_t):
            if joint.action_probability(a) > 0:
                theta_next.append(joint.conditional(a).prob(1))
            else:
                theta_next.append(current)
        return tuple(theta_next)
    if isinstance(family, GridFamily):
        best_theta, best_value = None, math.inf
        for point in family.points:
            value = decoupled_risk(metric, rule, point, theta_t, family, model)
            if value < best_value:
                best_theta, best_value = point, value
        return best_theta
    raise ValueError(f"family kind {family.kind!r} does not admit minimisation")


def forecast_distance(cf_a: ConditionalForecast, cf_b: ConditionalForecast):
    """Max over actions of the total-variation distance between slices."""
    return max(total_variation(cf_a.slice_for(a), cf_b.slice_for(a))
               for a in cf_a.action_space)


@dataclass(frozen=True)
class Trajectory:
    """Retraining iterates, their performative risks, and the first step at
    which consecutive forecasts agreed (None when never within budget)."""

    parameters: tuple
    risks: tuple
    stable_at: Optional[int]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        width = len(self.parameters[0])
        writer.writerow(["step"] + [f"theta_a{i}" for i in range(width)]
                        + ["perf_risk", "stable"])
        for step, (theta, risk) in enumerate(zip(self.parameters, self.risks)):
            stable = 1 if self.stable_at is not None and step == self.stable_at else 0
            writer.writerow([step] + [repr(float(t)) for t in theta]
                            + [repr(float(risk)), stable])
        return buf.getvalue()


def run_retraining(metric: str, rule: ScoringRule, theta0,
                   family: ParametricFamily, model: CausalModel,
                   max_steps: int, tol: float = STABILITY_TOL) -> Trajectory:
    """Iterate ``retrain_step`` from ``theta0`` for up to ``max_steps`` steps,
    stopping early once consecutive forecasts agree within ``tol``."""
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    parameters = [tuple(theta0)]
    risks = [performative_risk(metric, rule, theta0, family, model)]
    stable_at = None
    for step in range(1, max_steps + 1):
        theta_next = retrain_step(metric, rule, parameters[-1], family, model)
        parameters.append(tuple(theta_next))
        risks.append(performative_risk(metric, rule, theta_next, family, model))
        gap = forecast_distance(family.to_forecast(theta_next),
                                family.to_forecast(parameters[-2]))
        if gap < tol:
            stable_at = step - 1
            break
    return Trajectory(tuple(parameters), tuple(risks), stable_at)
