"""Causal models: outcome kernels plus forecast-to-action mechanisms.

A model couples an outcome kernel ``P(Y | A = a)`` (optionally reacting to
the announced forecast through predicate-indexed overrides) with a mechanism
mapping a conditional forecast to a distribution over actions.  Together they
induce the joint law of (action, outcome) once a forecast is announced.

Decision boundaries compare forecast summaries as floats; ties break toward
the lowest action index so surfaces are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence

from .distributions import (
    ConditionalForecast,
    FiniteDistribution,
    JointDistribution,
    bernoulli,
    point_mass,
    total_variation,
)
from .scoring import ScoringRule, expected_score

__all__ = [
    "ForecastPredicate",
    "Mechanism",
    "ArgmaxRule",
    "ArgminRule",
    "ThresholdRule",
    "TableRule",
    "MixtureWithUniform",
    "BayesActRule",
    "OutcomeKernel",
    "CausalModel",
    "Utility",
    "bayes_act",
    "action_distribution",
    "induced_joint",
    "construct_impossibility_model",
]

EQUALITY_TOL = 1e-9


def _summary(forecast_slice) -> float:
    """Default real-valued summary of a slice: mass at outcome 1."""
    if isinstance(forecast_slice, FiniteDistribution) and forecast_slice.is_binary:
        return float(forecast_slice.prob(1))
    raise ValueError(
        "non-binary forecast slices need an explicit summary function")


@dataclass(frozen=True)
class ForecastPredicate:
    """Serialisable predicate on a conditional forecast.

    kinds: ``slice_equals`` (slice within ``tol`` total variation of
    ``target``) and ``slice_le`` / ``slice_lt`` / ``slice_ge`` / ``slice_gt``
    (summary of the slice against ``threshold``).
    """

    kind: str
    action: object
    target: Optional[FiniteDistribution] = None
    threshold: Optional[float] = None
    tol: float = EQUALITY_TOL

    def matches(self, cf: ConditionalForecast) -> bool:
        fslice = cf.slice_for(self.action)
        if self.kind == "slice_equals":
            return total_variation(fslice, self.target) <= self.tol
        value = _summary(fslice)
        t = float(self.threshold)
        if self.kind == "slice_le":
            return value <= t
        if self.kind == "slice_lt":
            return value < t
        if self.kind == "slice_ge":
            return value >= t
        if self.kind == "slice_gt":
            return value > t
        raise ValueError(f"unknown predicate kind {self.kind!r}")

    def to_dict(self) -> dict:
        payload = {"kind": self.kind, "action": self.action}
        if self.target is not None:
            payload["target"] = self.target.to_dict()
            payload["tol"] = self.tol
        if self.threshold is not None:
            payload["threshold"] = float(self.threshold)
        return payload


class Mechanism:
    """Maps a conditional forecast to a distribution over actions."""

    kind = "abstract"

    def action_distribution(self, cf: ConditionalForecast,
                            action_space: tuple) -> FiniteDistribution:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params()}


def _point_mass_on(action, action_space) -> FiniteDistribution:
    return FiniteDistribution(
        action_space, tuple(1 if a == action else 0 for a in action_space))


@dataclass(frozen=True)
class ArgmaxRule(Mechanism):
    """Deterministically pick the action whose slice summary is largest."""

    summary: Optional[Callable] = None
    kind = "argmax_rule"

    def action_distribution(self, cf, action_space):
        fn = self.summary or _summary
        best, best_value = None, -math.inf
        for a in action_space:
            value = float(fn(cf.slice_for(a)))
            if value > best_value:
                best, best_value = a, value
        return _point_mass_on(best, action_space)


@dataclass(frozen=True)
class ArgminRule(Mechanism):
    summary: Optional[Callable] = None
    kind = "argmin_rule"

    def action_distribution(self, cf, action_space):
        fn = self.summary or _summary
        best, best_value = None, math.inf
        for a in action_space:
            value = float(fn(cf.slice_for(a)))
            if value < best_value:
                best, best_value = a, value
        return _point_mass_on(best, action_space)


@dataclass(frozen=True)
class ThresholdRule(Mechanism):
    """Pick action 1 iff the slice-0 summary is <= ``low`` and the slice-1
    summary is >= ``high``; otherwise pick action 0.  Both comparisons are
    inclusive, so surfaces are discontinuous exactly on the thresholds."""

    low: float = 0.4
    high: float = 0.4
    kind = "threshold_rule"

    def action_distribution(self, cf, action_space):
        if tuple(action_space) != (0, 1):
            raise ValueError("threshold rule is defined for actions (0, 1)")
        fires = (_summary(cf.slice_for(0)) <= float(self.low)
                 and _summary(cf.slice_for(1)) >= float(self.high))
        return _point_mass_on(1 if fires else 0, action_space)

    def params(self):
        return {"low": float(self.low), "high": float(self.high)}


@dataclass(frozen=True)
class TableRule(Mechanism):
    """First matching predicate selects its action distribution; the default
    applies otherwise."""

    clauses: tuple  # of (ForecastPredicate, FiniteDistribution)
    default: FiniteDistribution
    kind = "table_rule"

    def action_distribution(self, cf, action_space):
        for predicate, dist in self.clauses:
            if predicate.matches(cf):
                return dist
        return self.default

    def params(self):
        return {
            "clauses": [
                {"when": p.to_dict(), "dist": d.to_dict()} for p, d in self.clauses
            ],
            "default": self.default.to_dict(),
        }


@dataclass(frozen=True)
class MixtureWithUniform(Mechanism):
    """Explore uniformly with probability ``epsilon``, otherwise follow the
    inner mechanism.  Guarantees every action at least ``epsilon / |A|``."""

    epsilon: float
    inner: Mechanism
    kind = "mixture_with_uniform"

    def action_distribution(self, cf, action_space):
        inner = self.inner.action_distribution(cf, action_space)
        uniform = Fraction(1, len(action_space))
        eps = self.epsilon
        probs = tuple(eps * uniform + (1 - eps) * inner.prob(a)
                      for a in action_space)
        return FiniteDistribution(action_space, probs)

    def params(self):
        return {"epsilon": float(self.epsilon), "inner": self.inner.to_dict()}


@dataclass(frozen=True)
class Utility:
    """Payoff table over (action, outcome) pairs."""

    table: Mapping

    def __init__(self, table):
        object.__setattr__(self, "table", dict(table))

    @classmethod
    def from_rows(cls, actions, outcomes, rows) -> "Utility":
        table = {}
        for a, row in zip(actions, rows):
            for y, value in zip(outcomes, row):
                table[(a, y)] = value
        return cls(table)

    def value(self, action, outcome):
        try:
            return self.table[(action, outcome)]
        except KeyError:
            raise ValueError(
                f"utility undefined for ({action!r}, {outcome!r})") from None

    def in_unit_interval(self) -> bool:
        return all(0 <= v <= 1 for v in self.table.values())

    def to_dict(self) -> dict:
        return {"table": [[a, y, float(v)] for (a, y), v in sorted(
            self.table.items(), key=lambda kv: str(kv[0]))]}


def bayes_act(utility: Utility, cf: ConditionalForecast):
    """Action maximising the forecast-expected utility
    ``sum_y U(a, y) F(y | a)``; ties break to the lowest action index."""
    best, best_value = None, None
    for a in cf.action_space:
        fslice = cf.slice_for(a)
        value = sum(p * utility.value(a, y)
                    for y, p in zip(fslice.support, fslice.probabilities))
        if best_value is None or value > best_value:
            best, best_value = a, value
    return best


@dataclass(frozen=True)
class BayesActRule(Mechanism):
    """Deterministic agent acting on the announced forecast via its utility."""

    utility: Utility
    kind = "bayes_act"

    def action_distribution(self, cf, action_space):
        return _point_mass_on(bayes_act(self.utility, cf), action_space)

    def params(self):
        return {"utility": self.utility.to_dict()}


@dataclass(frozen=True)
class OutcomeKernel:
    """Outcome distribution per action, with optional forecast-dependent
    overrides (first matching predicate wins; unmentioned actions keep the
    base slice).  The kernel is forecast-invariant iff no overrides exist."""

    per_action: Mapping
    overrides: tuple = ()

    def __init__(self, per_action, overrides=()):
        object.__setattr__(self, "per_action", dict(per_action))
        object.__setattr__(self, "overrides", tuple(
            (pred, dict(slices)) for pred, slices in overrides))

    @property
    def forecast_invariant(self) -> bool:
        return not self.overrides

    def slices_for(self, cf: ConditionalForecast) -> dict:
        """Effective conditional outcome distributions once ``cf`` is announced."""
        for predicate, replacement in self.overrides:
            if predicate.matches(cf):
                merged = dict(self.per_action)
                merged.update(replacement)
                return merged
        return dict(self.per_action)


@dataclass(frozen=True)
class CausalModel:
    """Action space, outcome space, outcome kernel and mechanism."""

    action_space: tuple
    outcome_space: tuple
    kernel: OutcomeKernel
    mechanism: Mechanism

    def __init__(self, action_space, outcome_space, kernel, mechanism):
        action_space = tuple(action_space)
        outcome_space = tuple(outcome_space)
        for a in action_space:
            if a not in kernel.per_action:
                raise ValueError(f"kernel missing action {a!r}")
        object.__setattr__(self, "action_space", action_space)
        object.__setattr__(self, "outcome_space", outcome_space)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "mechanism", mechanism)


def _check_forecast(model: CausalModel, cf: ConditionalForecast) -> None:
    if tuple(cf.action_space) != model.action_space:
        raise ValueError(
            f"forecast actions {cf.action_space!r} != model actions "
            f"{model.action_space!r}")


def action_distribution(model: CausalModel,
                        cf: ConditionalForecast) -> FiniteDistribution:
    """The mechanism's induced action distribution for the announced forecast."""
    _check_forecast(model, cf)
    return model.mechanism.action_distribution(cf, model.action_space)


def induced_joint(model: CausalModel, cf: ConditionalForecast) -> JointDistribution:
    """Joint law of (action, outcome) once ``cf`` is announced: the induced
    action distribution times the effective kernel slices."""
    _check_forecast(model, cf)
    return JointDistribution(
        action_distribution(model, cf), model.kernel.slices_for(cf))


def construct_impossibility_model(
    rule: ScoringRule,
    p0: FiniteDistribution,
    p1: FiniteDistribution,
    f_tilde: FiniteDistribution,
    variant: str = "deterministic",
    q: Optional[FiniteDistribution] = None,
) -> CausalModel:
    """Self-defeating construction under which a strictly proper rule pays
    more for a misreport than for the correct forecast.

    The kernel sends action 1 to ``p1`` and action 0 to ``p0``; the mechanism
    selects (``deterministic``) or boosts (``full_support``) action 1 exactly
    when the announced slice for action 1 equals ``f_tilde``.  The
    ``full_support`` variant mixes the exploration distribution ``q`` in, and
    requires ``q(1)`` below the margin ratio
    ``(S(f~, p1) - S(p0, p0)) / (S(p1, p1) - S(f~, p1))``.
    """
    if total_variation(p0, p1) <= EQUALITY_TOL:
        raise ValueError("p0 and p1 must differ")
    if total_variation(f_tilde, p1) <= EQUALITY_TOL:
        raise ValueError("f_tilde must differ from p1")
    actions = (0, 1)
    kernel = OutcomeKernel({0: p0, 1: p1})
    trigger = ForecastPredicate("slice_equals", action=1, target=f_tilde)

    if variant == "deterministic":
        mechanism = TableRule(
            clauses=((trigger, _point_mass_on(1, actions)),),
            default=_point_mass_on(0, actions),
        )
    elif variant == "full_support":
        if q is None:
            raise ValueError("full_support variant needs an exploration distribution q")
        if tuple(q.support) != actions or any(p <= 0 for p in q.probabilities):
            raise ValueError("q must have full support on the actions (0, 1)")
        gain = expected_score(rule, f_tilde, p1) - expected_score(rule, p0, p0)
        loss = expected_score(rule, p1, p1) - expected_score(rule, f_tilde, p1)
        bound = gain / loss
        if not q.prob(1) < bound:
            raise ValueError(
                f"q(1) = {float(q.prob(1))} must be below "
                f"{float(bound)} for the misreport to pay")

        def mixed(boosted):
            half = Fraction(1, 2)
            return FiniteDistribution(
                actions,
                tuple(q.prob(a) * half + (half if a == boosted else 0)
                      for a in actions))

        mechanism = TableRule(
            clauses=((trigger, mixed(1)),), default=mixed(0))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    outcomes = tuple(sorted(set(p0.support) | set(p1.support),
                            key=lambda x: str(x)))
    return CausalModel(actions, outcomes, kernel, mechanism)


def impossibility_forecasts(p0, p1, f_tilde):
    """The construction's canonical (correct, misreport) forecast pair."""
    correct = ConditionalForecast((0, 1), {0: p0, 1: p1})
    misreport = ConditionalForecast((0, 1), {0: p0, 1: f_tilde})
    return correct, misreport
