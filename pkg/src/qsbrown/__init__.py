"""Simulation and statistical verification of quasi-stationary spacing laws
for hierarchically interacting Brownian particle systems."""

from .analysis import (
    TestFunction,
    TestReport,
    coordinate_function,
    generator_apply,
    ks_statistic,
    ks_statistic_two,
    martingale_residual,
    one_step_generator_estimate,
    quadratic_function,
    test_consistency,
    test_martingale,
    test_quasi_stationarity,
)
from .catalog import (
    build_preset,
    expected_spacing_stats,
    list_presets,
    preset_beta_tasep,
    preset_free,
    preset_oconnell_yor,
)
from .errors import (
    DiagonalNotUnit,
    DivergentIntegral,
    ExpressionError,
    FailureRateExceeded,
    IndexUnavailable,
    NonIntegrableSingularity,
    NotPositiveDefinite,
    ParameterOutOfRange,
    QsbrownError,
    StepStuck,
    SupportViolation,
)
from .linalg import CholeskyFactor, NuVector, a_tilde, cholesky, covariance_window, solve_nu, theta
from .measure import (
    SpacingMeasure,
    build_measure,
    sample_initial_condition,
    sample_spacing,
    spacing_measures,
)
from .model import (
    DriftSequence,
    ModelSpec,
    Potential,
    ValidationReport,
    load_model,
    potential_beta_tasep,
    potential_custom,
    potential_free,
    potential_oconnell_yor,
    spec_from_doc,
    spec_from_json,
    spec_to_doc,
    truncate,
    validate_measure_conditions,
    validate_skew_symmetry,
)
from .rng import PhiloxStream
from .sde import (
    DeterministicInit,
    PathEnsemble,
    PathwiseInit,
    QuasiStationaryInit,
    SimConfig,
    boundary_vector,
    drift,
    resolve_backend,
    simulate,
)

__version__ = "0.1.0"
