import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from performa.distributions import (
    ConditionalForecast,
    FiniteDistribution,
    RngStream,
    VectorDistribution,
    bernoulli,
    binary_forecast,
)
from performa.estimators import (
    Dataset,
    ExperimentConfig,
    evaluate_estimator,
    estimator_truth,
    nearest_rank,
    plugin_divergence,
    plugin_ipw_score,
    replicate_estimates,
    run_estimator_experiment,
    sample_dataset,
    sample_dataset_stratified,
    unbiased_brier_divergence,
    unbiased_energy_divergence,
)
from performa.fixtures import fixture
from performa.mechanisms import CausalModel, OutcomeKernel, TableRule
from performa.performative import ipw_expected_score, performative_divergence
from performa.scoring import brier_rule, divergence, energy_rule

BRIER = brier_rule()
ENERGY = energy_rule()


def enumerate_binary_mean(estimator, slices, counts, cf):
    """Exact expectation of an estimator under a stratified binary design."""
    actions = sorted(counts)
    layout = [a for a in actions for _ in range(counts[a])]
    total = Fraction(0)
    for pattern in itertools.product((0, 1), repeat=len(layout)):
        weight = Fraction(1)
        for a, y in zip(layout, pattern):
            weight *= Fraction(slices[a].prob(y))
        value = estimator(Dataset(list(zip(layout, pattern))), cf).value
        total += weight * Fraction(value).limit_denominator(10**12)
    return total


class TestUnbiasedBrier:
    CF = binary_forecast(0.5, 0.25)

    def test_hand_evaluation(self):
        result = unbiased_brier_divergence(Dataset([(0, 0), (0, 1)]), self.CF)
        assert result.value == -0.25
        assert result.defined
        assert result.per_action_counts == {0: 2}

    def test_degenerate_zero(self):
        cf = binary_forecast(1.0, 0.0)
        data = Dataset([(0, 1), (0, 1), (1, 0), (1, 0)])
        result = unbiased_brier_divergence(data, cf)
        assert result.value == 0

    def test_single_observation_undefined(self):
        result = unbiased_brier_divergence(Dataset([(0, 1)]), self.CF)
        assert not result.defined
        assert math.isnan(result.value)

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError, match="binary"):
            unbiased_brier_divergence(Dataset([(0, 2), (0, 0)]), self.CF)

    def test_stratified_enumeration_oracle(self):
        # n0 = n1 = 2: the exact mean over all 16 outcome patterns must equal
        # the count-weighted conditional divergence.
        slices = fixture("example-E.3").model.kernel.per_action
        cf = binary_forecast(Fraction(2, 5), Fraction(2, 5))
        mean = enumerate_binary_mean(
            unbiased_brier_divergence, slices, {0: 2, 1: 2}, cf)
        want = (Fraction(1, 2) * (Fraction(1, 2) - Fraction(2, 5)) ** 2
                + Fraction(1, 2) * (Fraction(1, 4) - Fraction(2, 5)) ** 2)
        assert abs(mean - want) < Fraction(1, 10**12)


class TestUnbiasedEnergy:
    def test_point_mass_match_is_zero(self):
        cf = ConditionalForecast((0,), {0: VectorDistribution([(1.0,)], (1,))})
        data = Dataset([(0, (1.0,)), (0, (1.0,))])
        assert unbiased_energy_divergence(data, cf).value == 0

    def test_hand_evaluation(self):
        cf = ConditionalForecast((0,), {0: VectorDistribution([(0.5,)], (1,))})
        data = Dataset([(0, (0.0,)), (0, (1.0,))])
        assert unbiased_energy_divergence(data, cf).value == 0

    def test_undefined_with_single_observation(self):
        cf = ConditionalForecast(
            (0, 1), {a: VectorDistribution([(0.5,)], (1,)) for a in (0, 1)})
        result = unbiased_energy_divergence(Dataset([(0, (0.0,)), (1, (1.0,))]), cf)
        assert not result.defined

    def test_dimension_mismatch_rejected(self):
        cf = ConditionalForecast((0,), {0: VectorDistribution([(0.5, 0.5)], (1,))})
        with pytest.raises(ValueError, match="dimension"):
            unbiased_energy_divergence(Dataset([(0, (0.0,)), (0, (1.0,))]), cf)

    def test_stratified_enumeration_oracle_two_atoms(self):
        # Outcomes live on {0, 1} embedded in R; enumeration over all
        # patterns must match the count-weighted energy divergence.
        kernel = {0: FiniteDistribution(((0.0,), (1.0,)), (Fraction(1, 2), Fraction(1, 2))),
                  1: FiniteDistribution(((0.0,), (1.0,)), (Fraction(3, 4), Fraction(1, 4)))}
        cf = ConditionalForecast(
            (0, 1),
            {0: VectorDistribution([(0.0,), (1.0,)], (Fraction(3, 5), Fraction(2, 5))),
             1: VectorDistribution([(0.0,), (1.0,)], (Fraction(1, 5), Fraction(4, 5)))})
        counts = {0: 2, 1: 2}
        layout = [0, 0, 1, 1]
        total = Fraction(0)
        for pattern in itertools.product(((0.0,), (1.0,)), repeat=4):
            weight = Fraction(1)
            for a, y in zip(layout, pattern):
                weight *= kernel[a].prob(y)
            value = unbiased_energy_divergence(
                Dataset(list(zip(layout, pattern))), cf).value
            total += weight * Fraction(value).limit_denominator(10**12)
        want = Fraction(0)
        for a in (0, 1):
            truth = VectorDistribution(
                kernel[a].support, kernel[a].probabilities)
            want += Fraction(counts[a], 4) * Fraction(
                divergence(ENERGY, cf.slice_for(a), truth)
            ).limit_denominator(10**12)
        assert abs(total - want) < Fraction(1, 10**9)


class TestPlugins:
    CF = binary_forecast(0.5, 0.25)

    def test_matching_frequencies_give_zero(self):
        data = Dataset([(0, 1), (0, 0), (1, 1), (1, 0), (1, 0), (1, 0)])
        cf = binary_forecast(0.5, 0.25)
        assert abs(plugin_divergence(data, cf, BRIER).value) < 1e-15

    def test_plugin_divergence_hand_value(self):
        result = plugin_divergence(Dataset([(0, 1), (0, 1)]), self.CF, BRIER)
        assert result.value == 0.25

    def test_plugin_ipw_hand_value(self):
        result = plugin_ipw_score(Dataset([(0, 1), (1, 0)]), self.CF, BRIER)
        assert result.value == -0.3125

    def test_single_action_weights_cancel(self):
        data = Dataset([(0, 1), (0, 0), (0, 1)])
        got = plugin_ipw_score(data, self.CF, BRIER).value
        want = np.mean([BRIER.score(bernoulli(0.5), y) for _, y in data.pairs])
        assert abs(got - want) < 1e-15

    def test_plugin_consistency_large_n(self):
        fx = fixture("example-E.3")
        cf = binary_forecast(0.7, 0.45)
        data = sample_dataset(fx.model, cf, 10**4, RngStream(99))
        truth = float(performative_divergence(BRIER, cf, fx.model))
        assert abs(plugin_divergence(data, cf, BRIER).value - truth) < 0.02

    def test_ipw_consistency_large_n(self):
        fx = fixture("example-E.3")
        cf = binary_forecast(0.5, 0.25)
        data = sample_dataset(fx.model, cf, 10**4, RngStream(100))
        truth = float(ipw_expected_score(BRIER, cf, fx.model))
        assert abs(plugin_ipw_score(data, cf, BRIER).value - truth) < 0.02


class TestReplication:
    def test_vectorised_path_matches_dataset_operations(self):
        fx = fixture("example-E.3")
        cf = binary_forecast(0.7, 0.45)
        for estimator in ("unbiased:brier", "plugin:brier", "ipw:brier"):
            values, defined = replicate_estimates(fx.model, cf, 9, 40, 31337,
                                                  estimator)
            for r in range(40):
                data = sample_dataset(fx.model, cf, 9, RngStream(31337, r))
                result = evaluate_estimator(estimator, data, cf)
                assert result.defined == defined[r]
                if result.defined:
                    assert abs(result.value - values[r]) < 1e-12

    def test_mc_unbiasedness_iid(self):
        fx = fixture("example-E.3")
        for probs, truth in (((0.5, 0.25), 0.0), ((0.7, 0.45), 0.04)):
            cf = binary_forecast(*probs)
            values, defined = replicate_estimates(
                fx.model, cf, 46, 10**5, 2024, "unbiased:brier")
            kept = values[defined]
            se = kept.std(ddof=1) / math.sqrt(kept.size)
            assert abs(kept.mean() - truth) <= 4 * se + 1e-12

    def test_undefined_rate_matches_closed_form(self):
        # at n=2 the estimator is undefined iff the two draws split actions
        fx = fixture("example-E.3")
        cf = binary_forecast(0.5, 0.25)
        _, defined = replicate_estimates(fx.model, cf, 2, 10**5, 4242,
                                         "unbiased:brier")
        rate = 1 - defined.mean()
        p1 = 1 / 6
        want = 2 * p1 * (1 - p1)
        se = math.sqrt(want * (1 - want) / 10**5)
        assert abs(rate - want) <= 5 * se


class TestExperiment:
    def test_same_seed_identical_summary(self):
        fx = fixture("example-E.3")
        config = ExperimentConfig(
            fx.model, (("correct", binary_forecast(0.5, 0.25)),),
            (2, 5), 200, 7, ("unbiased:brier", "ipw:brier"))
        assert run_estimator_experiment(config).to_csv() \
            == run_estimator_experiment(config).to_csv()

    def test_single_replication_degenerate_model(self):
        kernel = OutcomeKernel({0: bernoulli(1)})
        model = CausalModel((0,), (0, 1), kernel,
                            TableRule((), FiniteDistribution((0,), (1,))))
        cf = ConditionalForecast((0,), {0: bernoulli(0.8)})
        config = ExperimentConfig(model, (("only", cf),), (2,), 1, 3,
                                  ("unbiased:brier",))
        row = run_estimator_experiment(config).rows[0]
        assert row.median == row.q05 == row.q95
        assert row.undefined_count == 0

    def test_truth_column(self):
        fx = fixture("example-E.3")
        cf = binary_forecast(0.7, 0.45)
        assert abs(estimator_truth("unbiased:brier", cf, fx.model) - 0.04) < 1e-12
        assert abs(estimator_truth("ipw:brier", cf, fx.model) - (-0.5175)) < 1e-12

    def test_replications_must_be_positive(self):
        fx = fixture("example-E.3")
        with pytest.raises(ValueError, match="replications"):
            ExperimentConfig(fx.model, (), (2,), 0, 1, ("unbiased:brier",))

    def test_unknown_estimator_rejected(self):
        with pytest.raises(ValueError, match="unknown estimator"):
            evaluate_estimator("bootstrap:brier", Dataset([(0, 1)]),
                               binary_forecast(0.5, 0.25))

    def test_quantile_order(self):
        fx = fixture("example-E.3")
        config = ExperimentConfig(
            fx.model, (("off", binary_forecast(0.7, 0.45)),),
            (3, 10), 300, 11, ("plugin:brier",))
        for row in run_estimator_experiment(config).rows:
            assert row.q05 <= row.median <= row.q95

    def test_csv_header(self):
        fx = fixture("example-E.3")
        config = ExperimentConfig(
            fx.model, (("correct", binary_forecast(0.5, 0.25)),),
            (2,), 10, 1, ("unbiased:brier",))
        text = run_estimator_experiment(config).to_csv()
        assert text.splitlines()[0] == ("n,forecast,estimator,median,q05,q95,"
                                        "truth,replications,undefined_count,"
                                        "orientation")


class TestStratifiedSampling:
    def test_counts_respected(self):
        fx = fixture("example-E.3")
        data = sample_dataset_stratified(
            fx.model, binary_forecast(0.5, 0.25), {0: 3, 1: 2}, RngStream(1))
        counts = {}
        for a, _ in data.pairs:
            counts[a] = counts.get(a, 0) + 1
        assert counts == {0: 3, 1: 2}


class TestNearestRank:
    def test_examples(self):
        vals = [1, 2, 3, 4]
        assert nearest_rank(vals, 50) == 2
        assert nearest_rank(vals, 5) == 1
        assert nearest_rank(vals, 95) == 4
        assert math.isnan(nearest_rank([], 50))
