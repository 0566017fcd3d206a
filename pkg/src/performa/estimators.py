"""Estimating divergences and weighted scores from sampled (action, outcome)
pairs.

Two unbiased estimators pair a forecast slice against within-action sample
statistics: a squared-error form for binary outcomes and a U-statistic form
(Gini mean difference) for vector outcomes.  Both need at least two
observations of every *observed* action; datasets violating that are flagged
undefined rather than patched.  Plugin estimators substitute empirical
conditionals and are biased at small samples but consistent.

The experiment harness replays the estimators over seeded replications and
summarises each (forecast, sample size, estimator) cell by nearest-rank
median and 5/95 percentiles next to the exactly computed truth.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .distributions import (
    ConditionalForecast,
    FiniteDistribution,
    RngStream,
    VectorDistribution,
    sample,
    vector_distance,
    gini_mean_difference,
)
from .mechanisms import CausalModel, induced_joint
from .performative import ipw_expected_score, performative_divergence
from .scoring import ScoringRule, expected_score, rule_by_name

__all__ = [
    "Dataset",
    "EstimatorResult",
    "ExperimentConfig",
    "ExperimentSummary",
    "sample_dataset",
    "sample_dataset_stratified",
    "unbiased_brier_divergence",
    "unbiased_energy_divergence",
    "plugin_divergence",
    "plugin_ipw_score",
    "evaluate_estimator",
    "replicate_estimates",
    "run_estimator_experiment",
    "nearest_rank",
]


@dataclass(frozen=True)
class Dataset:
    """Finite sequence of (action, outcome) pairs with optional provenance
    ``(model id, forecast id, seed)``."""

    pairs: tuple
    provenance: Optional[tuple] = None

    def __init__(self, pairs, provenance=None):
        object.__setattr__(self, "pairs", tuple((a, y) for a, y in pairs))
        object.__setattr__(self, "provenance", provenance)

    def __len__(self):
        return len(self.pairs)

    def actions(self):
        return [a for a, _ in self.pairs]

    def outcomes(self):
        return [y for _, y in self.pairs]

    def by_action(self) -> dict:
        groups = {}
        for a, y in self.pairs:
            groups.setdefault(a, []).append(y)
        return groups


@dataclass(frozen=True)
class EstimatorResult:
    """``defined`` is False exactly when some observed action has fewer
    observations than the estimator's minimum (two); the value is NaN then."""

    value: float
    defined: bool
    per_action_counts: Mapping


def sample_dataset(model: CausalModel, cf: ConditionalForecast, n: int,
                   rng: RngStream, provenance=None) -> Dataset:
    """Draw ``n`` i.i.d. pairs from the joint law induced by announcing ``cf``."""
    joint = induced_joint(model, cf)
    actions = sample(joint.action_dist, rng, n)
    pairs = []
    for a in actions:
        y = sample(joint.conditional(a), rng, 1)[0]
        pairs.append((a, y))
    return Dataset(pairs, provenance)


def sample_dataset_stratified(model: CausalModel, cf: ConditionalForecast,
                              counts: Mapping, rng: RngStream,
                              provenance=None) -> Dataset:
    """Draw a fixed number of outcomes per action from the induced kernel.

    The per-action design makes the unbiased estimators exactly unbiased
    conditional on the counts, which is what the enumeration oracle checks.
    """
    slices = model.kernel.slices_for(cf)
    pairs = []
    for a in model.action_space:
        m = counts.get(a, 0)
        for y in sample(slices[a], rng, m):
            pairs.append((a, y))
    return Dataset(pairs, provenance)


def _counts(data: Dataset) -> dict:
    counts = {}
    for a, _ in data.pairs:
        counts[a] = counts.get(a, 0) + 1
    return counts


def unbiased_brier_divergence(data: Dataset,
                              cf: ConditionalForecast) -> EstimatorResult:
    """Unbiased estimate of the squared-error divergence for binary outcomes:

    ``(1/n) sum_i (p^_{a_i} - f_{a_i})^2 - p^(1 - p^) / (n_{a_i} - 1)``

    with ``n_a`` the count of action ``a``, ``p^_a`` the within-action
    outcome mean and ``f_a`` the forecast mass at 1.
    """
    if any(y not in (0, 1) for y in data.outcomes()):
        raise ValueError("binary outcomes required")
    counts = _counts(data)
    if any(m < 2 for m in counts.values()):
        return EstimatorResult(math.nan, False, counts)
    n = len(data)
    groups = data.by_action()
    total = 0.0
    for a, ys in groups.items():
        m = counts[a]
        p_hat = sum(ys) / m
        f_a = float(cf.slice_for(a).prob(1))
        total += (m / n) * ((p_hat - f_a) ** 2 - p_hat * (1 - p_hat) / (m - 1))
    return EstimatorResult(total, True, counts)


def unbiased_energy_divergence(data: Dataset,
                               cf: ConditionalForecast) -> EstimatorResult:
    """Unbiased estimate of the energy divergence for vector outcomes:

    ``(1/n) sum_i E_F||Y - y_i|| - 0.5 * U_i - 0.5 * E_F||Y - Y'||``

    where ``U_i`` is the within-action mean distance from ``y_i`` to the
    other observations of the same action (a Gini mean difference
    U-statistic).
    """
    counts = _counts(data)
    if any(m < 2 for m in counts.values()):
        return EstimatorResult(math.nan, False, counts)
    n = len(data)
    groups = {a: [tuple(y) if isinstance(y, Sequence) else (y,) for y in ys]
              for a, ys in data.by_action().items()}
    total = 0.0
    for a, ys in groups.items():
        fslice = cf.slice_for(a)
        if not isinstance(fslice, VectorDistribution):
            raise ValueError("forecast slices must be vector distributions")
        if any(len(y) != fslice.dimension for y in ys):
            raise ValueError("outcome dimension does not match the forecast")
        m = counts[a]
        half_gini = gini_mean_difference(fslice) / 2
        for i, y in enumerate(ys):
            to_y = sum(w * vector_distance(atom, y)
                       for atom, w in zip(fslice.atoms, fslice.weights))
            within = sum(vector_distance(y, other)
                         for j, other in enumerate(ys) if j != i)
            total += to_y - within / (2 * (m - 1)) - half_gini
    return EstimatorResult(total / n, True, counts)


def _empirical_conditional(ys, rule: ScoringRule):
    if rule.outcome_kind == "vector":
        atoms = [tuple(y) if isinstance(y, Sequence) else (y,) for y in ys]
        return VectorDistribution(atoms, [1 / len(ys)] * len(ys))
    if rule.outcome_kind == "binary":
        p = sum(ys) / len(ys)
        return FiniteDistribution((0, 1), (1 - p, p))
    support, weights = [], []
    seen = {}
    for y in ys:
        if y not in seen:
            seen[y] = 0
        seen[y] += 1
    for y, c in seen.items():
        support.append(y)
        weights.append(c / len(ys))
    return FiniteDistribution(tuple(support), tuple(weights))


def plugin_divergence(data: Dataset, cf: ConditionalForecast,
                      rule: ScoringRule) -> EstimatorResult:
    """Plugin estimate ``(1/n) sum_i S(P^(.|a_i), y_i) - S(F(.|a_i), y_i)``
    with ``P^`` the empirical within-action distribution.  Defined for any
    observed counts (one observation suffices, at the price of bias)."""
    counts = _counts(data)
    n = len(data)
    groups = data.by_action()
    empirical = {a: _empirical_conditional(ys, rule) for a, ys in groups.items()}
    total = 0.0
    for a, ys in groups.items():
        fslice = cf.slice_for(a)
        for y in ys:
            total += rule.score(empirical[a], y) - rule.score(fslice, y)
    return EstimatorResult(total / n, True, counts)


def plugin_ipw_score(data: Dataset, cf: ConditionalForecast,
                     rule: ScoringRule) -> EstimatorResult:
    """Plugin estimate of the weighted score with empirical weights
    ``n_a / n``; the weights cancel into per-action means:
    ``sum_a (1/n_a) sum_{i: a_i = a} S(F(.|a), y_i)``."""
    counts = _counts(data)
    total = 0.0
    for a, ys in data.by_action().items():
        fslice = cf.slice_for(a)
        total += sum(rule.score(fslice, y) for y in ys) / counts[a]
    return EstimatorResult(total, True, counts)


# --- experiment harness -----------------------------------------------------

_ESTIMATOR_KINDS = ("unbiased", "plugin", "ipw")


def _parse_estimator(name: str):
    kind, _, rule_name = name.partition(":")
    if kind not in _ESTIMATOR_KINDS or not rule_name:
        raise ValueError(
            f"unknown estimator {name!r}; use one of "
            f"{[k + ':<rule>' for k in _ESTIMATOR_KINDS]}")
    return kind, rule_by_name(rule_name)


def evaluate_estimator(name: str, data: Dataset,
                       cf: ConditionalForecast) -> EstimatorResult:
    """Dispatch an estimator by config name: ``unbiased:brier``,
    ``unbiased:energy``, ``plugin:<rule>`` or ``ipw:<rule>``."""
    kind, rule = _parse_estimator(name)
    if kind == "unbiased":
        if rule.name == "brier":
            return unbiased_brier_divergence(data, cf)
        if rule.name == "energy":
            return unbiased_energy_divergence(data, cf)
        raise ValueError(f"no unbiased estimator for rule {rule.name!r}")
    if kind == "plugin":
        return plugin_divergence(data, cf, rule)
    return plugin_ipw_score(data, cf, rule)


def estimator_truth(name: str, cf: ConditionalForecast, model: CausalModel):
    """The population quantity an estimator targets, computed exactly."""
    kind, rule = _parse_estimator(name)
    if kind == "ipw":
        return ipw_expected_score(rule, cf, model)
    return performative_divergence(rule, cf, model)


def estimator_orientation(name: str) -> str:
    kind, _ = _parse_estimator(name)
    return "max" if kind == "ipw" else "min"


def _binary_sampling_arrays(model, cf):
    joint = induced_joint(model, cf)
    actions = list(model.action_space)
    aprobs = np.array([float(joint.action_probability(a)) for a in actions])
    # threshold form of the inverse-cdf draw used by sample(): y = 1 when the
    # uniform lands at or above the mass of outcome 0
    tails = np.array([float(joint.conditional(a).prob(0)) for a in actions])
    fvals = np.array([float(cf.slice_for(a).prob(1)) for a in actions])
    return aprobs, tails, fvals


def _count_based_values(kind, acts, ys, fvals, k):
    """Evaluate a binary-outcome estimator from action counts alone."""
    n = acts.size
    n_a = np.bincount(acts, minlength=k).astype(float)
    sums = np.bincount(acts, weights=ys, minlength=k)
    observed = n_a > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        p_hat = np.where(observed, sums / np.maximum(n_a, 1), 0.0)
    err2 = (p_hat - fvals) ** 2
    spread = p_hat * (1 - p_hat)
    if kind == "unbiased":
        if np.any(observed & (n_a < 2)):
            return math.nan, False
        value = float(np.sum(
            np.where(observed, (n_a / n) * (err2 - spread / np.maximum(n_a - 1, 1)),
                     0.0)))
        return value, True
    if kind == "plugin":
        return float(np.sum(np.where(observed, (n_a / n) * err2, 0.0))), True
    # ipw: per-action mean scores, summed over observed actions
    value = float(np.sum(np.where(observed, -(err2 + spread), 0.0)))
    return value, True


def replicate_estimates(model: CausalModel, cf: ConditionalForecast, n: int,
                        replications: int, seed: int, estimator: str):
    """Evaluate ``estimator`` on ``replications`` seeded datasets of size
    ``n`` drawn from the induced joint.

    Replication ``r`` draws from the stream ``(seed, r)``, so results do not
    depend on evaluation order or parallel schedule.  Returns (values,
    defined) arrays; undefined replications carry NaN.
    """
    kind, rule = _parse_estimator(estimator)
    joint = induced_joint(model, cf)
    binary = (set(model.outcome_space) == {0, 1} and rule.name == "brier"
              and all(joint.conditional(a).support == (0, 1)
                      for a in model.action_space))
    k = len(model.action_space)
    values = np.empty(replications)
    defined = np.zeros(replications, dtype=bool)
    if binary:
        aprobs, tails, fvals = _binary_sampling_arrays(model, cf)
        cdf = np.cumsum(aprobs)
        cdf[-1] = 1.0
        for r in range(replications):
            u = RngStream(seed, r).uniforms(2 * n)
            acts = np.searchsorted(cdf, u[:n], side="right")
            ys = (u[n:] >= tails[acts]).astype(float)
            values[r], defined[r] = _count_based_values(kind, acts, ys, fvals, k)
    else:
        for r in range(replications):
            data = sample_dataset(model, cf, n, RngStream(seed, r))
            result = evaluate_estimator(estimator, data, cf)
            values[r], defined[r] = result.value, result.defined
    values[~defined] = math.nan
    return values, defined


def nearest_rank(sorted_values: Sequence, q: float):
    """Nearest-rank percentile of an ascending sequence (deterministic)."""
    m = len(sorted_values)
    if m == 0:
        return math.nan
    rank = max(math.ceil(q / 100 * m), 1)
    return sorted_values[rank - 1]


@dataclass(frozen=True)
class SummaryRow:
    n: int
    forecast: str
    estimator: str
    median: float
    q05: float
    q95: float
    truth: float
    replications: int
    undefined_count: int
    orientation: str


@dataclass(frozen=True)
class ExperimentSummary:
    rows: tuple

    CSV_HEADER = ("n,forecast,estimator,median,q05,q95,truth,"
                  "replications,undefined_count,orientation")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_HEADER.split(","))
        for r in self.rows:
            writer.writerow([
                r.n, r.forecast, r.estimator,
                repr(float(r.median)), repr(float(r.q05)), repr(float(r.q95)),
                repr(float(r.truth)), r.replications, r.undefined_count,
                r.orientation,
            ])
        return buf.getvalue()


@dataclass(frozen=True)
class ExperimentConfig:
    model: CausalModel
    forecasts: tuple          # of (label, ConditionalForecast)
    ns: tuple
    replications: int
    seed: int
    estimators: tuple

    def __init__(self, model, forecasts, ns, replications, seed, estimators):
        if replications < 1:
            raise ValueError("replications must be at least 1")
        object.__setattr__(self, "model", model)
        object.__setattr__(self, "forecasts", tuple(forecasts))
        object.__setattr__(self, "ns", tuple(ns))
        object.__setattr__(self, "replications", int(replications))
        object.__setattr__(self, "seed", int(seed))
        object.__setattr__(self, "estimators", tuple(estimators))


def run_estimator_experiment(config: ExperimentConfig) -> ExperimentSummary:
    """Summarise every (forecast, n, estimator) cell of the replication grid.

    Undefined replications are excluded from the quantiles and counted, so
    the conditioning introduced by the minimum-count requirement stays
    visible in the output.
    """
    rows = []
    for label, cf in config.forecasts:
        truths = {est: float(estimator_truth(est, cf, config.model))
                  for est in config.estimators}
        for n in config.ns:
            for est in config.estimators:
                values, defined = replicate_estimates(
                    config.model, cf, n, config.replications, config.seed, est)
                kept = np.sort(values[defined])
                rows.append(SummaryRow(
                    n=n, forecast=label, estimator=est,
                    median=nearest_rank(kept, 50),
                    q05=nearest_rank(kept, 5),
                    q95=nearest_rank(kept, 95),
                    truth=truths[est],
                    replications=config.replications,
                    undefined_count=int(config.replications - defined.sum()),
                    orientation=estimator_orientation(est),
                ))
    return ExperimentSummary(tuple(rows))
