"""Acceptance suite: every release criterion, one printed verdict per
criterion (run with ``pytest tests/test_acceptance.py -s`` to see the lines).

Each check pins its tolerance here; nothing is deferred to calibration.
"""

import itertools
import math
import random
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from performa.distributions import (
    FiniteDistribution,
    bernoulli,
    binary_forecast,
)
from performa.estimators import (
    Dataset,
    replicate_estimates,
    unbiased_brier_divergence,
    unbiased_energy_divergence,
)
from performa.fixtures import fixture, graph_fixture, FIXTURES
from performa.graphs import SeparationQuery, d_separated
from performa.mechanisms import (
    bayes_act,
    construct_impossibility_model,
    impossibility_forecasts,
    induced_joint,
)
from performa.performative import (
    classify_properness,
    expected_performative_score,
    ipw_expected_score,
    make_metric,
    performative_divergence,
    performative_entropy,
    scan_surface,
    utility_score_expected,
)
from performa.retraining import SaturatedTableFamily, performative_risk, retrain_step
from performa.scoring import (
    brier_rule,
    divergence,
    energy_rule,
    entropy,
    expected_score,
    log_rule,
)

from oracles import all_singleton_queries, d_separated_by_paths, random_admg

BRIER = brier_rule()
SEED = 20240101


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name}")


def test_c01_argmax_example_exact():
    with criterion("C1 argmax example: exact expected scores, <1s"):
        start = time.perf_counter()
        model = fixture("example-3.1").model
        s_correct = expected_performative_score(
            BRIER, binary_forecast(0.5, 0.25), model)
        s_mis = expected_performative_score(
            BRIER, binary_forecast(0.2, 0.25), model)
        elapsed = time.perf_counter() - start
        assert abs(s_correct - (-0.25)) <= 1e-12
        assert abs(s_mis - (-0.1875)) <= 1e-12
        assert elapsed < 1.0


def test_c02_threshold_example_exact():
    with criterion("C2 threshold example: -0.21 at (0.4, 0.4), -0.25 correct"):
        model = fixture("example-E.2").model
        s_mis = expected_performative_score(
            BRIER, binary_forecast(Fraction(2, 5), Fraction(2, 5)), model)
        s_correct = expected_performative_score(
            BRIER, binary_forecast(Fraction(1, 2), Fraction(1, 4)), model)
        assert s_mis == Fraction(-21, 100)
        assert s_correct == Fraction(-1, 4)


def test_c03_exploration_example_scores():
    with criterion("C3 exploration example: correct -23/96; misreport exact"):
        model = fixture("example-E.3").model
        s_correct = expected_performative_score(
            BRIER, binary_forecast(Fraction(1, 2), Fraction(1, 4)), model)
        assert abs(float(s_correct) - (-23 / 96)) <= 1e-9
        # exact evaluation of the misreport: P(A) = (1/6, 5/6), slice scores
        # -13/50 and -21/100 against the invariant kernel
        s_mis = expected_performative_score(
            BRIER, binary_forecast(Fraction(2, 5), Fraction(2, 5)), model)
        assert s_mis == Fraction(-131, 600)


@pytest.mark.xfail(
    strict=True,
    reason="target value -13/60 is inconsistent with the mechanism's exact "
    "expected score: the unexplored action's slice is misreported at 0.4 and "
    "scores -0.26 against its Bernoulli(0.5) kernel, not -0.25, giving "
    "-131/600 = -0.21833...; both round to the documented -0.22",
)
def test_c03_exploration_misreport_stated_value():
    model = fixture("example-E.3").model
    s_mis = expected_performative_score(
        BRIER, binary_forecast(Fraction(2, 5), Fraction(2, 5)), model)
    print("[FAIL expected] C3b exploration misreport equals -13/60 "
          f"(exact value is {s_mis} = {float(s_mis):.10f})")
    assert abs(float(s_mis) - (-13 / 60)) <= 1e-9


CLASSIFICATION_CASES = [
    # fixture, metric, expected report flags
    ("example-3.1", "brier_score",
     dict(observationally_strictly_proper=True, counterfactually_proper=False)),
    ("example-E.2", "brier_score",
     dict(observationally_proper=False, counterfactually_proper=False)),
    ("example-E.3", "brier_score",
     dict(observationally_proper=False, counterfactually_proper=False)),
    ("example-4.1", "utility",
     dict(proper=True, strictly_proper=False)),
    ("example-4.1", "utility+delta:brier",
     dict(observationally_strictly_proper=True, counterfactually_proper=True)),
    ("example-E.2", "divergence:brier",
     dict(observationally_strictly_proper=True, counterfactually_proper=True)),
    ("example-E.2", "ipw:brier",
     dict(observationally_proper=False, counterfactually_proper=False)),
    ("example-E.3", "divergence:brier",
     dict(strictly_proper=True)),
    ("example-E.3", "ipw:brier",
     dict(strictly_proper=True)),
]


def test_c04_properness_classifications_on_full_grids():
    with criterion("C4 properness reports on 201x201 grids match the "
                   "documented classifications, each <10s"):
        for name, metric_name, expected in CLASSIFICATION_CASES:
            fx = fixture(name)
            metric = make_metric(metric_name, utility=fx.utility, delta=0.2)
            start = time.perf_counter()
            surface = scan_surface(metric, fx.model, resolution=201)
            report = classify_properness(surface, fx.model, tolerance=1e-9)
            elapsed = time.perf_counter() - start
            assert elapsed < 10.0, (name, metric_name, elapsed)
            for key, want in expected.items():
                got = getattr(report, key)
                assert got == want, (name, metric_name, key, got, want)


def test_c05_impossibility_witnesses():
    with criterion("C5 self-defeating constructions: misreport beats correct "
                   "by more than 0.01 under the strictly proper rule"):
        p0, p1, f_tilde = bernoulli(Fraction(1, 2)), bernoulli(Fraction(1, 4)), \
            bernoulli(Fraction(2, 5))
        correct, misreport = impossibility_forecasts(p0, p1, f_tilde)
        for variant, q in (("deterministic", None),
                           ("full_support",
                            FiniteDistribution((0, 1), (Fraction(1, 2),
                                                        Fraction(1, 2))))):
            model = construct_impossibility_model(
                BRIER, p0, p1, f_tilde, variant=variant, q=q)
            margin = (expected_performative_score(BRIER, misreport, model)
                      - expected_performative_score(BRIER, correct, model))
            assert margin > 0.01, (variant, float(margin))


def test_c06_exact_unbiasedness_by_enumeration():
    with criterion("C6 stratified enumeration: estimator means equal the "
                   "conditional divergence to 1e-12, <1s"):
        start = time.perf_counter()

        # binary squared-error estimator over all 2^4 outcome patterns
        slices = fixture("example-E.3").model.kernel.per_action
        cf = binary_forecast(Fraction(2, 5), Fraction(2, 5))
        layout = [0, 0, 1, 1]
        mean = Fraction(0)
        for pattern in itertools.product((0, 1), repeat=4):
            weight = Fraction(1)
            for a, y in zip(layout, pattern):
                weight *= Fraction(slices[a].prob(y))
            value = unbiased_brier_divergence(
                Dataset(list(zip(layout, pattern))), cf).value
            mean += weight * Fraction(value).limit_denominator(10**12)
        want = (Fraction(1, 2) * (Fraction(1, 2) - Fraction(2, 5)) ** 2
                + Fraction(1, 2) * (Fraction(1, 4) - Fraction(2, 5)) ** 2)
        assert abs(float(mean - want)) <= 1e-12

        # energy estimator over a two-atom vector support
        from performa.distributions import VectorDistribution, ConditionalForecast

        kernel = {0: ((0.0,), (1.0,), Fraction(1, 2)),
                  1: ((0.0,), (1.0,), Fraction(3, 4))}
        cfv = ConditionalForecast(
            (0, 1),
            {0: VectorDistribution([(0.0,), (1.0,)],
                                   (Fraction(3, 5), Fraction(2, 5))),
             1: VectorDistribution([(0.0,), (1.0,)],
                                   (Fraction(1, 5), Fraction(4, 5)))})
        energy = energy_rule()
        mean_v = Fraction(0)
        for pattern in itertools.product(((0.0,), (1.0,)), repeat=4):
            weight = Fraction(1)
            for a, y in zip(layout, pattern):
                zero, one, p_zero = kernel[a]
                weight *= p_zero if y == zero else 1 - p_zero
            value = unbiased_energy_divergence(
                Dataset(list(zip(layout, pattern))), cfv).value
            mean_v += weight * Fraction(value).limit_denominator(10**12)
        want_v = Fraction(0)
        for a in (0, 1):
            zero, one, p_zero = kernel[a]
            truth = VectorDistribution([zero, one], (p_zero, 1 - p_zero))
            want_v += Fraction(1, 2) * Fraction(
                divergence(energy, cfv.slice_for(a), truth)
            ).limit_denominator(10**12)
        assert abs(float(mean_v - want_v)) <= 1e-12
        assert time.perf_counter() - start < 1.0


def test_c07_replication_experiment_reduced_scale():
    with criterion("C7 replication experiment: unbiased estimator centred at "
                   "truth, plugins biased at small n with shrinking bias, <60s"):
        start = time.perf_counter()
        model = fixture("example-E.3").model
        ns = (2, 3, 4, 5, 6, 7, 8, 9, 10, 21, 46)
        reps = 2000
        forecasts = {"correct": binary_forecast(0.5, 0.25),
                     "off": binary_forecast(0.7, 0.45)}

        for label, cf in forecasts.items():
            truth = float(performative_divergence(BRIER, cf, model))
            for n in ns:
                values, defined = replicate_estimates(
                    model, cf, n, reps, SEED, "unbiased:brier")
                kept = values[defined]
                se = kept.std(ddof=1) / math.sqrt(kept.size) if kept.size > 1 else 0.0
                assert abs(kept.mean() - truth) <= 4 * se + 1e-12, (label, n)

        for estimator, truth_fn in (
                ("plugin:brier",
                 lambda cf: float(performative_divergence(BRIER, cf, model))),
                ("ipw:brier",
                 lambda cf: float(ipw_expected_score(BRIER, cf, model)))):
            for label, cf in forecasts.items():
                truth = truth_fn(cf)
                deviations, ses = {}, {}
                for n in (3, 10, 46):
                    values, defined = replicate_estimates(
                        model, cf, n, reps, SEED, estimator)
                    kept = np.sort(values[defined])
                    median = kept[(len(kept) - 1) // 2]
                    deviations[n] = abs(median - truth)
                    ses[n] = kept.std(ddof=1) / math.sqrt(kept.size)
                assert deviations[3] > 3 * ses[3], (estimator, label, deviations)
                slack = 3 * (ses[10] + ses[46])
                assert deviations[3] > deviations[10] - slack, (estimator, label)
                assert deviations[10] > deviations[46] - slack, (estimator, label)
        assert time.perf_counter() - start < 60.0


def test_c08_one_step_retraining():
    with criterion("C8 retraining: one step to the correct parameter, fixed "
                   "point, zero divergence risk"):
        model = fixture("example-E.3").model
        family = SaturatedTableFamily((0, 1))
        rng = random.Random(SEED)
        for _ in range(10):
            theta0 = (rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0))
            theta1 = retrain_step("divergence", BRIER, theta0, family, model)
            assert theta1 == (Fraction(1, 2), Fraction(1, 4)), theta0
            theta2 = retrain_step("divergence", BRIER, theta1, family, model)
            assert theta2 == theta1
            risk = performative_risk("divergence", BRIER, theta1, family, model)
            assert abs(float(risk)) <= 1e-12


def test_c09_graph_verdicts_and_oracle_agreement():
    with criterion("C9 separation verdicts on the graph fixtures, and "
                   "reachability agrees with the exhaustive-path oracle on "
                   "200 random graphs"):
        verdicts = [
            ("figure-1a", "Y", "F", (), False),
            ("figure-2a", "Y", "F", ("A",), False),
            ("figure-5a", "Y", "F", ("A1", "A2", "A3"), True),
            ("figure-5b", "Y", "F", ("A1", "A2", "A3"), True),
            ("figure-5c", "Y", "F", ("A",), False),
        ]
        for name, a, b, cond, want in verdicts:
            g = graph_fixture(name)
            got = d_separated(g, SeparationQuery({a}, {b}, cond))
            assert got == want, name

        rng = random.Random(SEED)
        for _ in range(200):
            g = random_admg(rng, max_vertices=6)
            for a, b, cond in all_singleton_queries(g):
                fast = d_separated(g, SeparationQuery({a}, {b}, cond))
                slow = d_separated_by_paths(g, {a}, {b}, cond)
                assert fast == slow, (g, a, b, cond)


def test_c10_property_suites():
    with criterion("C10 property suites: classical properness, divergence "
                   "nonnegativity, score decomposition, argmax equality, "
                   "weighted-score identity"):
        rng = random.Random(SEED)

        # classical properness for the three rules
        log = log_rule()
        energy = energy_rule()
        atoms = [(0.0,), (1.0,), (2.5,)]
        for _ in range(1000):
            f, p = (bernoulli(rng.uniform(0.02, 0.98)) for _ in range(2))
            for rule in (BRIER, log):
                gap = expected_score(rule, p, p) - expected_score(rule, f, p)
                assert gap >= -1e-12
                if abs(float(f.prob(1)) - float(p.prob(1))) > 1e-6:
                    assert gap > 0
            raw_f = [rng.random() + 1e-3 for _ in atoms]
            raw_p = [rng.random() + 1e-3 for _ in atoms]
            from performa.distributions import VectorDistribution
            fv = VectorDistribution(atoms, [w / sum(raw_f) for w in raw_f])
            pv = VectorDistribution(atoms, [w / sum(raw_p) for w in raw_p])
            assert (expected_score(energy, pv, pv)
                    - expected_score(energy, fv, pv)) >= -1e-12

        # divergence nonnegativity over the full grid on every fixture
        for name in sorted(FIXTURES):
            model = FIXTURES[name].model
            surface = scan_surface(make_metric("divergence:brier"), model,
                                   resolution=201)
            assert min(surface.values()) >= -1e-12, name

        # score = divergence + entropy decomposition, classical and induced
        for _ in range(500):
            f, p = (bernoulli(rng.uniform(0.02, 0.98)) for _ in range(2))
            lhs = -expected_score(BRIER, f, p)
            rhs = divergence(BRIER, f, p) + entropy(BRIER, p)
            assert abs(lhs - rhs) <= 1e-12
        model = fixture("example-E.3").model
        for f0 in (0.0, 0.25, 0.4, 0.61, 1.0):
            for f1 in (0.0, 0.4, 0.5, 0.87):
                cf = binary_forecast(f0, f1)
                s = expected_performative_score(BRIER, cf, model)
                d = performative_divergence(BRIER, cf, model)
                h = performative_entropy(BRIER, cf, model)
                assert abs(float(-s - (d + h))) <= 1e-12

        # incentive compatibility: utility-score maximisers equal expected-
        # utility maximisers on the full grid; the augmented score's
        # maximisers induce the optimal action with a correct observed slice
        fx = fixture("example-4.1")
        metric_u = make_metric("utility", utility=fx.utility)
        surf_u = scan_surface(metric_u, fx.model, resolution=201)
        best_u = max(surf_u.values())
        score_argmax = {r.coords for r in surf_u.rows
                        if abs(r.value - best_u) <= 1e-12}
        direct = {r.coords: float(utility_score_expected(
            fx.utility, binary_forecast(*r.coords), fx.model))
            for r in surf_u.rows}
        top = max(direct.values())
        utility_argmax = {c for c, v in direct.items() if abs(v - top) <= 1e-12}
        assert score_argmax == utility_argmax

        metric_a = make_metric("utility+delta:brier", utility=fx.utility,
                               delta=0.2)
        surf_a = scan_surface(metric_a, fx.model, resolution=201)
        best_a = max(surf_a.values())
        for row in surf_a.rows:
            if abs(row.value - best_a) <= 1e-9:
                assert row.coords[0] == 0.5
                assert bayes_act(fx.utility, binary_forecast(*row.coords)) == 0

        # weighted score in cancelled form equals the direct weighted integral
        # wherever the weights cancel; without positivity a misreport beats
        # the correct forecast
        model = fixture("example-E.3").model
        for _ in range(50):
            cf = binary_forecast(rng.uniform(0.02, 0.98), rng.uniform(0.02, 0.98))
            joint = induced_joint(model, cf)
            direct_sum = 0.0
            for a in joint.support:
                w = float(joint.action_probability(a))
                cond = joint.conditional(a)
                for y, p in zip(cond.support, cond.probabilities):
                    if p:
                        direct_sum += (BRIER.score(cf.slice_for(a), y) / w) * w * float(p)
            assert abs(direct_sum
                       - float(ipw_expected_score(BRIER, cf, model))) <= 1e-12
        e2 = fixture("example-E.2").model
        s_mis = ipw_expected_score(BRIER, binary_forecast(0.4, 0.4), e2)
        s_cor = ipw_expected_score(BRIER, binary_forecast(0.5, 0.25), e2)
        assert s_mis > s_cor
