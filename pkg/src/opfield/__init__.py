"""Operator-scaling, operator-stable random fields.

Construction and simulation of random fields X: R^d -> R^m that scale as
{X(r^E t)} = {r^D X(t)} in law, with strictly operator-stable margins, via
moving-average and harmonizable stochastic integral representations; plus
kernel integrability checks and Monte-Carlo verification of the scaling,
stationarity, stability and Hölder-regularity laws.
"""

from .errors import (
    ConfigError,
    HypothesisNotMetError,
    InvalidOperatorError,
    OpFieldError,
    UnsupportedConfigError,
)
from .operators import (
    OperatorSpec,
    as_operator,
    commutes,
    mat_exp,
    matrix_powers,
)
from .polar import adapted_norm, polar, radial_part, sphere_sample
from .homogeneous import (
    HomogeneousFn,
    admissibility_probe,
    phi_extrema,
    power_sum,
    tau_radial,
    user_supplied,
)
from .generators import (
    GeneratorSpec,
    gaussian,
    log_cf,
    make_complex_isotropic,
    per_component,
    sample_operator_stable,
    spectral,
    spectral_decomposition,
    verify_ops_scaling,
)
from .integrability import (
    Box,
    KernelFamily,
    check_sas_closed_form,
    check_sufficient_condition,
    check_three_integrals,
    harm_kernel_family,
    ma_kernel_family,
    validate_harm_parameters,
    validate_ma_parameters,
)
from .fields import (
    FieldConfig,
    FieldSample,
    GridSpec,
    IntegrationGrid,
    build_grid,
    component_profile,
    fingerprint,
    harm_kernel,
    kernel_family_from_config,
    ma_kernel,
    make_config,
    simulate,
    simulate_ensemble,
    truncation_gauge,
)
from .verify import (
    CFDistanceReport,
    calibrate_noise_floor,
    empirical_cf,
    estimate_holder,
    holder_targets,
    verify_marginal_stability,
    verify_oss,
    verify_stationary_increments,
    verify_stochastic_continuity,
)
from .config import (
    ExperimentConfig,
    config_hash,
    parse_config,
    serialize_config,
)
from .export import RasterData, read_raster, write_csv, write_raster

__version__ = "0.1.0"

__all__ = [
    "OpFieldError",
    "InvalidOperatorError",
    "ConfigError",
    "HypothesisNotMetError",
    "UnsupportedConfigError",
    "OperatorSpec",
    "as_operator",
    "commutes",
    "mat_exp",
    "matrix_powers",
    "adapted_norm",
    "radial_part",
    "polar",
    "sphere_sample",
    "HomogeneousFn",
    "power_sum",
    "tau_radial",
    "user_supplied",
    "phi_extrema",
    "admissibility_probe",
    "GeneratorSpec",
    "per_component",
    "make_complex_isotropic",
    "spectral",
    "gaussian",
    "sample_operator_stable",
    "log_cf",
    "verify_ops_scaling",
    "spectral_decomposition",
    "Box",
    "KernelFamily",
    "ma_kernel_family",
    "harm_kernel_family",
    "check_three_integrals",
    "check_sas_closed_form",
    "check_sufficient_condition",
    "validate_ma_parameters",
    "validate_harm_parameters",
    "FieldConfig",
    "FieldSample",
    "GridSpec",
    "IntegrationGrid",
    "make_config",
    "build_grid",
    "truncation_gauge",
    "ma_kernel",
    "harm_kernel",
    "kernel_family_from_config",
    "simulate",
    "simulate_ensemble",
    "component_profile",
    "fingerprint",
    "CFDistanceReport",
    "empirical_cf",
    "verify_oss",
    "verify_stationary_increments",
    "verify_marginal_stability",
    "verify_stochastic_continuity",
    "estimate_holder",
    "holder_targets",
    "calibrate_noise_floor",
    "ExperimentConfig",
    "parse_config",
    "serialize_config",
    "config_hash",
    "RasterData",
    "write_raster",
    "read_raster",
    "write_csv",
]
