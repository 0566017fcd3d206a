"""Finite probability distributions over outcomes and actions.

Three carriers cover everything the scoring and estimation layers need:
categorical distributions over hashable labels, finitely supported
distributions over real vectors, and conditional forecasts (one outcome
distribution per action).  Expectations over these supports are computed
exactly; Monte Carlo only enters through :func:`sample`.

Probabilities may be ``float`` or ``fractions.Fraction``.  Exact inputs stay
exact through sums and products, which is what lets the command line report
rational expected scores verbatim.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

__all__ = [
    "PROB_TOL",
    "FiniteDistribution",
    "VectorDistribution",
    "ConditionalForecast",
    "JointDistribution",
    "RngStream",
    "bernoulli",
    "point_mass",
    "binary_forecast",
    "expectation",
    "sample",
    "gini_mean_difference",
    "total_variation",
]

PROB_TOL = 1e-12      # required normalisation accuracy
PROB_REPAIR = 1e-6    # deviations up to this are renormalised with a warning


def _check_weights(weights):
    weights = tuple(weights)
    if not weights:
        raise ValueError("distribution needs at least one atom")
    if any(w < 0 for w in weights):
        raise ValueError("probabilities must be nonnegative")
    total = sum(weights)
    deviation = abs(total - 1)
    if deviation <= PROB_TOL:
        return weights
    if deviation <= PROB_REPAIR:
        warnings.warn(
            f"probabilities sum to {float(total)!r}; renormalising",
            stacklevel=3,
        )
        return tuple(w / total for w in weights)
    raise ValueError(f"probabilities sum to {float(total)!r}, not 1")


@dataclass(frozen=True)
class FiniteDistribution:
    """Categorical distribution over distinct hashable labels."""

    support: tuple
    probabilities: tuple

    def __init__(self, support, probabilities):
        support = tuple(support)
        if len(set(support)) != len(support):
            raise ValueError("support labels must be distinct")
        probabilities = _check_weights(probabilities)
        if len(support) != len(probabilities):
            raise ValueError("support and probabilities differ in length")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probabilities", probabilities)
        object.__setattr__(
            self, "_mass", dict(zip(support, probabilities)))

    def prob(self, label):
        """Mass at ``label`` (0 when outside the support)."""
        return self._mass.get(label, 0)

    @property
    def is_binary(self) -> bool:
        return set(self.support) == {0, 1}

    def to_dict(self) -> dict:
        return {
            "kind": "finite",
            "support": list(self.support),
            "probabilities": [float(p) for p in self.probabilities],
        }


@dataclass(frozen=True)
class VectorDistribution:
    """Finitely supported distribution over vectors in R^d.

    Atoms may repeat (empirical distributions do), so weights are attached
    by position rather than by value.
    """

    atoms: tuple
    weights: tuple

    def __init__(self, atoms, weights):
        atoms = tuple(tuple(a) if isinstance(a, Sequence) else (a,) for a in atoms)
        weights = _check_weights(weights)
        if len(atoms) != len(weights):
            raise ValueError("atoms and weights differ in length")
        dims = {len(a) for a in atoms}
        if len(dims) != 1:
            raise ValueError("atoms must share one dimension")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def dimension(self) -> int:
        return len(self.atoms[0])

    def to_dict(self) -> dict:
        return {
            "kind": "vector",
            "atoms": [list(map(float, a)) for a in self.atoms],
            "weights": [float(w) for w in self.weights],
        }


def _as_vector(y):
    return tuple(y) if isinstance(y, Sequence) else (y,)


def vector_norm(v):
    """Euclidean norm; the one-dimensional case stays exact for rationals."""
    if len(v) == 1:
        return abs(v[0])
    return math.sqrt(sum(float(x) * float(x) for x in v))


def vector_distance(u, v):
    return vector_norm(tuple(a - b for a, b in zip(u, v)))


@dataclass(frozen=True)
class ConditionalForecast:
    """One outcome distribution per action.

    All slices must be of the same kind (categorical or vector).
    """

    action_space: tuple
    per_action: Mapping

    def __init__(self, action_space, per_action):
        action_space = tuple(action_space)
        per_action = dict(per_action)
        missing = [a for a in action_space if a not in per_action]
        if missing:
            raise ValueError(f"missing forecast slices for actions {missing!r}")
        kinds = {type(per_action[a]) for a in action_space}
        if len(kinds) != 1:
            raise ValueError("forecast slices must share one distribution kind")
        object.__setattr__(self, "action_space", action_space)
        object.__setattr__(self, "per_action", per_action)

    def slice_for(self, action):
        try:
            return self.per_action[action]
        except KeyError:
            raise ValueError(f"no forecast slice for action {action!r}") from None

    def __getitem__(self, action):
        return self.slice_for(action)

    def to_dict(self) -> dict:
        return {
            "kind": "conditional",
            "actions": list(self.action_space),
            "slices": [self.per_action[a].to_dict() for a in self.action_space],
        }


@dataclass(frozen=True)
class JointDistribution:
    """Joint law over (action, outcome): an action marginal plus one outcome
    distribution per action."""

    action_dist: FiniteDistribution
    conditionals: Mapping

    def __init__(self, action_dist, conditionals):
        conditionals = dict(conditionals)
        for a in action_dist.support:
            if a not in conditionals:
                raise ValueError(f"missing conditional for action {a!r}")
        object.__setattr__(self, "action_dist", action_dist)
        object.__setattr__(self, "conditionals", conditionals)

    def action_probability(self, action):
        return self.action_dist.prob(action)

    def conditional(self, action):
        return self.conditionals[action]

    @property
    def support(self) -> tuple:
        """Actions carrying positive probability."""
        return tuple(a for a in self.action_dist.support
                     if self.action_dist.prob(a) > 0)


@dataclass
class RngStream:
    """Reproducible random stream keyed by ``(seed, stream_id)``.

    Two streams constructed with the same key produce identical draws.  A
    stream is stateful and must not be shared between concurrent tasks; hand
    each task its own ``stream_id``.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        gen = getattr(self, "_generator", None)
        if gen is None:
            seq = np.random.SeedSequence([self.seed & (2**64 - 1),
                                          self.stream_id & (2**64 - 1)])
            gen = np.random.default_rng(seq)
            self._generator = gen
        return gen

    def uniforms(self, n: int) -> np.ndarray:
        return self.generator().random(n)


def bernoulli(p) -> FiniteDistribution:
    """Binary distribution on {0, 1} with success probability ``p``."""
    return FiniteDistribution((0, 1), (1 - p, p))


def point_mass(label) -> FiniteDistribution:
    return FiniteDistribution((label,), (1,))


def binary_forecast(*slice_probs) -> ConditionalForecast:
    """Conditional forecast over actions 0..k-1 with Bernoulli slices."""
    actions = tuple(range(len(slice_probs)))
    return ConditionalForecast(
        actions, {a: bernoulli(p) for a, p in zip(actions, slice_probs)})


def expectation(dist, f: Callable) -> float:
    """Exact expectation of ``f`` under a finite-support distribution."""
    if isinstance(dist, FiniteDistribution):
        pairs = zip(dist.support, dist.probabilities)
    elif isinstance(dist, VectorDistribution):
        pairs = zip(dist.atoms, dist.weights)
    else:
        raise ValueError(f"unsupported distribution type {type(dist)!r}")
    total = 0
    for x, w in pairs:
        total += w * f(x)
    return total


def sample(dist, rng: RngStream, n: int) -> list:
    """Draw ``n`` i.i.d. outcomes; deterministic given the stream key."""
    if n < 0:
        raise ValueError("sample size must be nonnegative")
    if isinstance(dist, FiniteDistribution):
        values, weights = dist.support, dist.probabilities
    elif isinstance(dist, VectorDistribution):
        values, weights = dist.atoms, dist.weights
    else:
        raise ValueError(f"unsupported distribution type {type(dist)!r}")
    if n == 0:
        return []
    cdf = np.cumsum([float(w) for w in weights])
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, rng.uniforms(n), side="right")
    return [values[i] for i in idx]


def gini_mean_difference(dist: VectorDistribution):
    """Expected distance between two independent draws,
    ``sum_ij w_i w_j ||x_i - x_j||``, evaluated exactly."""
    total = 0
    for i, (x, wx) in enumerate(zip(dist.atoms, dist.weights)):
        for y, wy in zip(dist.atoms[i + 1:], dist.weights[i + 1:]):
            total += 2 * wx * wy * vector_distance(x, y)
    return total


def total_variation(p, q) -> float:
    """Total variation distance between two finite distributions."""
    if isinstance(p, FiniteDistribution) and isinstance(q, FiniteDistribution):
        labels = set(p.support) | set(q.support)
        return float(sum(abs(p.prob(x) - q.prob(x)) for x in labels)) / 2
    if isinstance(p, VectorDistribution) and isinstance(q, VectorDistribution):
        masses_p, masses_q = {}, {}
        for a, w in zip(p.atoms, p.weights):
            masses_p[a] = masses_p.get(a, 0) + w
        for a, w in zip(q.atoms, q.weights):
            masses_q[a] = masses_q.get(a, 0) + w
        keys = set(masses_p) | set(masses_q)
        return float(sum(abs(masses_p.get(k, 0) - masses_q.get(k, 0))
                         for k in keys)) / 2
    raise ValueError("total variation needs two distributions of one kind")


def distribution_from_dict(payload: Mapping):
    """Inverse of the ``to_dict`` serialisers."""
    kind = payload.get("kind")
    if kind == "finite":
        return FiniteDistribution(payload["support"], payload["probabilities"])
    if kind == "vector":
        return VectorDistribution(payload["atoms"], payload["weights"])
    if kind == "conditional":
        actions = payload["actions"]
        slices = [distribution_from_dict(s) for s in payload["slices"]]
        return ConditionalForecast(actions, dict(zip(actions, slices)))
    raise ValueError(f"unknown distribution kind {kind!r}")
