"""Scoring, eliciting and estimating probabilistic forecasts that influence
the outcomes they predict."""

from .distributions import (
    ConditionalForecast,
    FiniteDistribution,
    JointDistribution,
    RngStream,
    VectorDistribution,
    bernoulli,
    binary_forecast,
    expectation,
    gini_mean_difference,
    point_mass,
    sample,
    total_variation,
)
from .graphs import (
    Admg,
    SeparationQuery,
    d_separated,
    forecast_invariant,
    graph_from_json,
    graph_to_json,
    latent_project,
    merge_vertices,
)
from .mechanisms import (
    ArgmaxRule,
    ArgminRule,
    BayesActRule,
    CausalModel,
    ForecastPredicate,
    MixtureWithUniform,
    OutcomeKernel,
    TableRule,
    ThresholdRule,
    Utility,
    action_distribution,
    bayes_act,
    construct_impossibility_model,
    impossibility_forecasts,
    induced_joint,
)
from .scoring import (
    LOG_ZERO_SENTINEL,
    ScoringRule,
    bregman,
    bregman_rule,
    brier,
    brier_rule,
    categorical_brier,
    conditional_divergence,
    conditional_entropy,
    conditional_expected_score,
    divergence,
    energy,
    energy_rule,
    entropy,
    expected_score,
    log_rule,
    log_score,
    rule_by_name,
    unit_brier_rule,
)
from .performative import (
    CorrectnessClass,
    Metric,
    PropernessReport,
    SurfaceTable,
    augmented_utility_score_expected,
    classify_properness,
    compute_utility_gap,
    correctness_class,
    expected_performative_score,
    ipw_expected_score,
    make_metric,
    performative_divergence,
    performative_entropy,
    scan_surface,
    utility_score_expected,
)
from .estimators import (
    Dataset,
    EstimatorResult,
    ExperimentConfig,
    ExperimentSummary,
    evaluate_estimator,
    estimator_truth,
    plugin_divergence,
    plugin_ipw_score,
    replicate_estimates,
    run_estimator_experiment,
    sample_dataset,
    sample_dataset_stratified,
    unbiased_brier_divergence,
    unbiased_energy_divergence,
)
from .retraining import (
    GridFamily,
    LogisticLinkFamily,
    ParametricFamily,
    SaturatedTableFamily,
    Trajectory,
    decoupled_risk,
    performative_risk,
    retrain_step,
    run_retraining,
)
from .fixtures import FIXTURES, GRAPHS, Fixture, fixture, graph_fixture

__version__ = "0.1.0"
