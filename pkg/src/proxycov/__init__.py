"""Proxy-metric weights from treatment-effect covariances across experiments."""

from .aggregates import (
    CellAggregate,
    ExperimentAggregate,
    UnitData,
    aggregate_unit_data,
    aggregate_units,
    merge_aggregates,
    within_noise,
)
from .estimands import effects_covariance, ols_weights, symmetric_inverse_sqrt, tls_weights
from .estimators import (
    WITHIN_NOISE_KCLASS_SCALE,
    expected_naive_covariance,
    jackknife_covariance,
    kclass_weights,
    limlk_weights,
    naive_covariance,
    noise_subtracted_covariance,
)
from .exceptions import (
    AmbiguousEigenvalueError,
    ConditioningError,
    DegenerateDirectionError,
    DimensionError,
    NumericalError,
    ProxycovError,
    SchemaError,
    UnsupportedDesignError,
    ValidationError,
)
from .simulate import (
    ESTIMATOR_NAMES,
    SCENARIO_KINDS,
    EstimatorSummary,
    MonteCarloResult,
    NpivGradientReport,
    StructuralScenario,
    jackknife_bias_ladder,
    npiv_gradient_check,
    preset_names,
    reference_slopes,
    run_monte_carlo,
    scenario_preset,
    simulate_panel,
    structural_truth_covariance,
)
from .types import CovEstimate, NoiseModel, PanelDims, ProxyWeights, TrueEffects
from ._version import __version__

__all__ = [
    "__version__",
    "AmbiguousEigenvalueError",
    "CellAggregate",
    "ConditioningError",
    "CovEstimate",
    "DegenerateDirectionError",
    "DimensionError",
    "ESTIMATOR_NAMES",
    "EstimatorSummary",
    "ExperimentAggregate",
    "MonteCarloResult",
    "NoiseModel",
    "NpivGradientReport",
    "NumericalError",
    "PanelDims",
    "ProxyWeights",
    "ProxycovError",
    "SCENARIO_KINDS",
    "SchemaError",
    "StructuralScenario",
    "TrueEffects",
    "UnitData",
    "UnsupportedDesignError",
    "ValidationError",
    "WITHIN_NOISE_KCLASS_SCALE",
    "aggregate_unit_data",
    "aggregate_units",
    "effects_covariance",
    "expected_naive_covariance",
    "jackknife_bias_ladder",
    "jackknife_covariance",
    "kclass_weights",
    "limlk_weights",
    "merge_aggregates",
    "naive_covariance",
    "noise_subtracted_covariance",
    "npiv_gradient_check",
    "ols_weights",
    "preset_names",
    "reference_slopes",
    "run_monte_carlo",
    "scenario_preset",
    "simulate_panel",
    "structural_truth_covariance",
    "symmetric_inverse_sqrt",
    "tls_weights",
    "within_noise",
]
