"""Numerical laboratory for GAP ensembles, conditional states, and
canonical typicality in finite-dimensional quantum systems."""

from .conditional import (
    ConditionalOutcome,
    conditional_density_matrix,
    conditional_dm_from_s_average,
    conditional_wave_function,
    outcome_distribution,
    sample_conditional_wf,
)
from .ensembles import (
    GAP_SAMPLERS,
    AcceptanceStarvationError,
    GapSampleBatch,
    RandomStream,
    RejectionOracleResult,
    empirical_covariance,
    rejection_oracle_ga,
    sample_g,
    sample_ga,
    sample_gap,
    sample_gap_via_dap,
    sample_gap_via_purification,
    sample_haar_onb,
    sample_haar_unitary,
    sample_uniform_sphere,
)
from .experiments import (
    EXPERIMENTS,
    CheckResult,
    ExperimentReport,
    estimate_density_matrix,
    fixed_probes,
    named_rho,
)
from .hilbert import (
    DensityMatrix,
    OrthonormalBasis,
    SpaceFactorization,
    StateVector,
    maximally_mixed,
    partial_inner_product,
    partial_trace,
    pure_density_matrix,
    purity,
    single_factor,
    tensor_product,
    trace_distance,
)
from .runner import RunConfig, load_run_config, main
from .thermal import (
    EnergyShell,
    HamiltonianSpec,
    build_composite,
    canonical_density_matrix,
    canonical_mean_energy,
    energy_shell,
    match_beta,
    microcanonical,
    partition_function,
    sample_shell_state,
    synth_bath_spectrum,
    variance_ratio_prediction,
)

__version__ = "0.1.0"

__all__ = [
    "AcceptanceStarvationError",
    "CheckResult",
    "ConditionalOutcome",
    "DensityMatrix",
    "EXPERIMENTS",
    "EnergyShell",
    "ExperimentReport",
    "GAP_SAMPLERS",
    "GapSampleBatch",
    "HamiltonianSpec",
    "OrthonormalBasis",
    "RandomStream",
    "RejectionOracleResult",
    "RunConfig",
    "SpaceFactorization",
    "StateVector",
    "build_composite",
    "canonical_density_matrix",
    "canonical_mean_energy",
    "conditional_density_matrix",
    "conditional_dm_from_s_average",
    "conditional_wave_function",
    "empirical_covariance",
    "energy_shell",
    "estimate_density_matrix",
    "fixed_probes",
    "load_run_config",
    "main",
    "match_beta",
    "maximally_mixed",
    "microcanonical",
    "named_rho",
    "outcome_distribution",
    "partial_inner_product",
    "partial_trace",
    "partition_function",
    "pure_density_matrix",
    "purity",
    "rejection_oracle_ga",
    "sample_conditional_wf",
    "sample_g",
    "sample_ga",
    "sample_gap",
    "sample_gap_via_dap",
    "sample_gap_via_purification",
    "sample_haar_onb",
    "sample_haar_unitary",
    "sample_shell_state",
    "sample_uniform_sphere",
    "single_factor",
    "synth_bath_spectrum",
    "tensor_product",
    "trace_distance",
    "variance_ratio_prediction",
]
