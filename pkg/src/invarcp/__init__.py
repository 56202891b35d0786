"""Invariant causal prediction.

Given samples of a target and its candidate predictors from several
environments (experimental regimes, intervention batches, time blocks),
this package estimates the set of causal predictors as the intersection
of all predictor sets whose regression on the target is invariant across
environments, with family-wise error control and union confidence
intervals for the causal coefficients.  A linear Gaussian SEM simulator
with do/noise interventions provides ground truth for benchmarking, and
a grid-search variant handles hidden confounding.
"""

from .data import (
    Dataset,
    EnvironmentGrouping,
    pool_environments,
    split_environments_by_variable,
    subset_environments,
    validate_dataset,
)
from .engine import (
    IcpConfig,
    IcpResult,
    VariableInterval,
    brute_force_oracle,
    confidence_intervals,
    preselect,
    run_icp,
    run_icp_robust,
)
from .hidden import (
    GridSpec,
    HiddenSetResult,
    hidden_invariance_test,
    hidden_set_test,
    run_hidden_icp,
)
from .invariance import (
    METHOD_CHOW,
    METHOD_RESIDUAL,
    InvarianceTestResult,
    chow_invariance_test,
    invariance_test,
    residual_invariance_test,
)
from .report import AnalysisReport, BenchmarkReport, canonical_json
from .sem import (
    HiddenIvScenario,
    Scenario,
    ScenarioParams,
    SemSpec,
    dataset_from_specs,
    do_intervention,
    generate_scenario,
    hidden_iv_scenario,
    noise_intervention,
    parents,
    random_sem,
    sample,
    sample_scenario_params,
    simultaneous_noise_scenario,
)
from .stats import (
    OlsFit,
    f_cdf,
    ks_two_sample,
    normal_cdf,
    ols_fit,
    t_quantile,
    two_sample_t_test,
    variance_f_test,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "EnvironmentGrouping",
    "pool_environments",
    "split_environments_by_variable",
    "subset_environments",
    "validate_dataset",
    "IcpConfig",
    "IcpResult",
    "VariableInterval",
    "brute_force_oracle",
    "confidence_intervals",
    "preselect",
    "run_icp",
    "run_icp_robust",
    "GridSpec",
    "HiddenSetResult",
    "hidden_invariance_test",
    "hidden_set_test",
    "run_hidden_icp",
    "METHOD_CHOW",
    "METHOD_RESIDUAL",
    "InvarianceTestResult",
    "chow_invariance_test",
    "invariance_test",
    "residual_invariance_test",
    "AnalysisReport",
    "BenchmarkReport",
    "canonical_json",
    "HiddenIvScenario",
    "Scenario",
    "ScenarioParams",
    "SemSpec",
    "dataset_from_specs",
    "do_intervention",
    "generate_scenario",
    "hidden_iv_scenario",
    "noise_intervention",
    "parents",
    "random_sem",
    "sample",
    "sample_scenario_params",
    "simultaneous_noise_scenario",
    "OlsFit",
    "f_cdf",
    "ks_two_sample",
    "normal_cdf",
    "ols_fit",
    "t_quantile",
    "two_sample_t_test",
    "variance_f_test",
]
