"""Monte Carlo simulator and analytic calculator for iterative distributed
eigenstate filtering by phase randomization."""

from .analytics import (
    GaussianSpec,
    PopulationProfile,
    energy_limit,
    expected_cost,
    fit_gaussian_spec,
    gaussian_bias,
    gaussian_energy,
    gaussian_spread,
    gaussian_spread_drop,
    multi_weak_floor,
    profile_from_amplitudes,
    spread_limit,
    strong_success_rate,
    weak_success_rate,
)
from .engine import (
    AmplitudeState,
    IterationOutcome,
    PhaseSample,
    PostselectionPolicy,
    TrajectoryRecord,
    multi_device_step,
    outcome_distribution,
    phase_uniformity_diagnostic,
    run_trajectory,
    sample_phases,
    single_device_step,
)
from .ensemble import EnsembleSummary, ProtocolConfig, fit_decay, merge_summaries, run_ensemble
from .results import ConfigError, load_experiment, read_results_csv, write_results_csv
from .spectral import (
    HamiltonianSpec,
    InitialStateSpec,
    SpectralModel,
    build_hamiltonian,
    build_model,
    decompose,
    project_initial,
)

__version__ = "0.1.0"

__all__ = [
    "AmplitudeState",
    "ConfigError",
    "EnsembleSummary",
    "GaussianSpec",
    "HamiltonianSpec",
    "InitialStateSpec",
    "IterationOutcome",
    "PhaseSample",
    "PopulationProfile",
    "PostselectionPolicy",
    "ProtocolConfig",
    "SpectralModel",
    "TrajectoryRecord",
    "build_hamiltonian",
    "build_model",
    "decompose",
    "energy_limit",
    "expected_cost",
    "fit_decay",
    "fit_gaussian_spec",
    "gaussian_bias",
    "gaussian_energy",
    "gaussian_spread",
    "gaussian_spread_drop",
    "load_experiment",
    "merge_summaries",
    "multi_device_step",
    "multi_weak_floor",
    "outcome_distribution",
    "phase_uniformity_diagnostic",
    "profile_from_amplitudes",
    "project_initial",
    "read_results_csv",
    "run_ensemble",
    "run_trajectory",
    "sample_phases",
    "single_device_step",
    "spread_limit",
    "strong_success_rate",
    "weak_success_rate",
    "write_results_csv",
]
