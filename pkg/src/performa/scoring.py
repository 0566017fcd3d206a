"""Classical scoring rules, expected scores, entropies and divergences.

Scores are oriented so that larger is better.  The energy score is usually
stated as a penalty; it is negated here so every rule shares the same
orientation.  The entropy of a rule is ``H(P) = -S(P, P)`` averaged over
``P``, and the divergence ``D(F, P) = S(P, P) - S(F, P)`` is nonnegative for
proper rules and zero at ``F = P``.

A forecast that assigns zero mass to an observed outcome would score
``log(0)``; that case is encoded by a large negative sentinel so that grid
scans stay total, and divergences against such forecasts are reported as
``+inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

from .distributions import (
    ConditionalForecast,
    FiniteDistribution,
    JointDistribution,
    VectorDistribution,
    gini_mean_difference,
    vector_distance,
    _as_vector,
)

__all__ = [
    "LOG_ZERO_SENTINEL",
    "ScoringRule",
    "brier",
    "categorical_brier",
    "log_score",
    "bregman",
    "energy",
    "brier_rule",
    "unit_brier_rule",
    "log_rule",
    "energy_rule",
    "bregman_rule",
    "rule_by_name",
    "expected_score",
    "entropy",
    "divergence",
    "conditional_expected_score",
    "conditional_entropy",
    "conditional_divergence",
]

LOG_ZERO_SENTINEL = -1e18


@dataclass(frozen=True)
class ScoringRule:
    """A scoring function plus metadata.

    ``properness_tag`` records what the constructor asserts ("improper",
    "proper" or "strictly_proper"); the property test suite verifies the
    assertion.  ``range_bounds`` is set for rules with a known bounded range,
    which the augmented utility score requires of its inner rule.
    """

    name: str
    score: Callable
    properness_tag: str
    outcome_kind: str
    range_bounds: Optional[tuple] = None

    def __call__(self, forecast, outcome):
        return self.score(forecast, outcome)


def _binary_success_prob(forecast: FiniteDistribution):
    if not isinstance(forecast, FiniteDistribution) or not forecast.is_binary:
        raise ValueError("forecast must be a distribution on {0, 1}")
    return forecast.prob(1)


def brier(forecast: FiniteDistribution, y):
    """Binary Brier score ``-(f - y)^2`` with ``f`` the mass at 1."""
    f = _binary_success_prob(forecast)
    if y not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {y!r}")
    return -((f - y) ** 2)


def categorical_brier(forecast: FiniteDistribution, y):
    """Sum-of-squared-deviations generalisation over a categorical support."""
    if not isinstance(forecast, FiniteDistribution):
        raise ValueError("forecast must be a finite distribution")
    total = 0
    for label in forecast.support:
        target = 1 if label == y else 0
        total += (forecast.prob(label) - target) ** 2
    if y not in set(forecast.support):
        total += 1  # unit mass the forecast failed to place anywhere
    return -total

def log_score(forecast: FiniteDistribution, y):
    """Natural log of the forecast mass at ``y``; ``log 0`` is the sentinel."""
    p = forecast.prob(y)
    if p <= 0:
        return LOG_ZERO_SENTINEL
    return math.log(p)


def bregman(phi: Callable, phi_prime: Callable, forecast: FiniteDistribution, y):
    """Bregman score ``phi'(f(y)) + sum_x (phi(f(x)) - f(x) phi'(f(x)))``.

    The sum runs over the finite support (counting measure).  ``phi(t) = t^2``
    recovers an affine rescaling of the Brier score and ``phi(t) = t log t``
    recovers the log score exactly.
    """
    if not isinstance(forecast, FiniteDistribution):
        raise ValueError("forecast must be a finite distribution")
    constant = 0
    for label in forecast.support:
        p = forecast.prob(label)
        if p > 0:
            constant += phi(p) - p * phi_prime(p)
        else:
            constant += phi(0)
    fy = forecast.prob(y)
    if fy <= 0:
        lead = phi_prime(0) if _is_finite_at_zero(phi_prime) else LOG_ZERO_SENTINEL
    else:
        lead = phi_prime(fy)
    return lead + constant


def _is_finite_at_zero(fn) -> bool:
    try:
        return math.isfinite(float(fn(0)))
    except (ValueError, ZeroDivisionError, OverflowError):
        return False


def energy(forecast: VectorDistribution, y):
    """Energy score over a finite vector support, negated so larger is better:
    ``-(E||Y' - y|| - 0.5 E||Y - Y'||)`` with ``Y, Y' ~ F`` independent."""
    if not isinstance(forecast, VectorDistribution):
        raise ValueError("forecast must be a vector distribution")
    y = _as_vector(y)
    if len(y) != forecast.dimension:
        raise ValueError(
            f"outcome dimension {len(y)} != forecast dimension {forecast.dimension}")
    to_y = sum(w * vector_distance(a, y)
               for a, w in zip(forecast.atoms, forecast.weights))
    return -(to_y - gini_mean_difference(forecast) / 2)


_PHIS = {
    # name: (phi, phi', properness when used as a Bregman generator)
    "quadratic": (lambda t: t * t, lambda t: 2 * t, "strictly_proper"),
    "xlogx": (
        lambda t: 0.0 if t == 0 else t * math.log(t),
        lambda t: math.log(t) + 1,
        "strictly_proper",
    ),
    "linear": (lambda t: t, lambda t: 1, "proper"),
}


def brier_rule() -> ScoringRule:
    return ScoringRule("brier", brier, "strictly_proper", "binary", (-1, 0))


def unit_brier_rule() -> ScoringRule:
    """Brier score rescaled into [0, 1]: ``1 - (f - y)^2``."""
    return ScoringRule(
        "brier-unit", lambda forecast, y: 1 + brier(forecast, y),
        "strictly_proper", "binary", (0, 1))


def log_rule() -> ScoringRule:
    return ScoringRule("log", log_score, "strictly_proper", "categorical")


def energy_rule() -> ScoringRule:
    return ScoringRule("energy", energy, "strictly_proper", "vector")


def bregman_rule(phi_name: str) -> ScoringRule:
    try:
        phi, phi_prime, tag = _PHIS[phi_name]
    except KeyError:
        raise ValueError(
            f"unknown convexity generator {phi_name!r}; "
            f"known: {sorted(_PHIS)}") from None
    return ScoringRule(
        f"bregman:{phi_name}",
        lambda forecast, y: bregman(phi, phi_prime, forecast, y),
        tag, "categorical")


def rule_by_name(name: str) -> ScoringRule:
    """Resolve a rule from its config string: ``brier`` | ``log`` | ``energy``
    | ``brier-unit`` | ``bregman:<phi-name>``."""
    if name == "brier":
        return brier_rule()
    if name == "brier-unit":
        return unit_brier_rule()
    if name == "log":
        return log_rule()
    if name == "energy":
        return energy_rule()
    if name.startswith("bregman:"):
        return bregman_rule(name.split(":", 1)[1])
    raise ValueError(f"unknown scoring rule {name!r}")


def _compatible(rule: ScoringRule, dist) -> None:
    if rule.outcome_kind == "vector":
        if not isinstance(dist, VectorDistribution):
            raise ValueError(f"rule {rule.name!r} needs vector distributions")
    else:
        if not isinstance(dist, FiniteDistribution):
            raise ValueError(f"rule {rule.name!r} needs finite distributions")


def expected_score(rule: ScoringRule, forecast, truth):
    """Exact expected score ``sum_y S(F, y) P(y)`` over the truth's support."""
    _compatible(rule, forecast)
    _compatible(rule, truth)
    if isinstance(truth, FiniteDistribution):
        pairs = zip(truth.support, truth.probabilities)
    else:
        pairs = zip(truth.atoms, truth.weights)
    total = 0
    for y, p in pairs:
        if p == 0:
            continue
        total += p * rule.score(forecast, y)
    return total


@lru_cache(maxsize=4096)
def _self_score(rule: ScoringRule, truth):
    # Grid scans revisit the same handful of truth distributions thousands
    # of times; rules and distributions are frozen, so caching is sound.
    return expected_score(rule, truth, truth)


def entropy(rule: ScoringRule, truth):
    """Generalised entropy ``-S(P, P)``."""
    return -_self_score(rule, truth)


def divergence(rule: ScoringRule, forecast, truth):
    """``S(P, P) - S(F, P)``; ``+inf`` when the forecast zeroes out an
    outcome the truth can produce and the rule scores that as ``log 0``."""
    _compatible(rule, forecast)
    _compatible(rule, truth)
    if isinstance(truth, FiniteDistribution):
        pairs = list(zip(truth.support, truth.probabilities))
    else:
        pairs = list(zip(truth.atoms, truth.weights))
    forecast_side = 0
    for y, p in pairs:
        if p == 0:
            continue
        s = rule.score(forecast, y)
        if s <= LOG_ZERO_SENTINEL:
            return math.inf
        forecast_side += p * s
    return _self_score(rule, truth) - forecast_side


def _check_covers(cf: ConditionalForecast, joint: JointDistribution) -> None:
    for a in joint.support:
        if a not in cf.per_action:
            raise ValueError(f"forecast has no slice for observed action {a!r}")


def conditional_expected_score(rule: ScoringRule, cf: ConditionalForecast,
                               joint: JointDistribution):
    """``sum_{a,y} S(F(.|a), y) P(a, y)`` over the finite joint support."""
    _check_covers(cf, joint)
    total = 0
    for a in joint.support:
        total += joint.action_probability(a) * expected_score(
            rule, cf.slice_for(a), joint.conditional(a))
    return total


def conditional_entropy(rule: ScoringRule, joint: JointDistribution):
    """Action-averaged entropy of the conditional outcome distributions."""
    total = 0
    for a in joint.support:
        total += joint.action_probability(a) * entropy(rule, joint.conditional(a))
    return total


def conditional_divergence(rule: ScoringRule, cf: ConditionalForecast,
                           joint: JointDistribution):
    """Action-weighted slice divergences
    ``sum_a P(a) D(F(.|a), P(Y|a))``; nonnegative for proper rules."""
    _check_covers(cf, joint)
    total = 0
    for a in joint.support:
        d = divergence(rule, cf.slice_for(a), joint.conditional(a))
        if math.isinf(d):
            return math.inf
        total += joint.action_probability(a) * d
    return total
