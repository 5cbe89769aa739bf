"""Heterogeneous strategic servers: equilibrium, fairness, simulation and limits."""

from ._core import (
    ConfigError,
    DomainError,
    EquilibriumSolution,
    ExperimentConfig,
    ModelParams,
    PopulationDistributions,
    PowerFamily,
    RateDistribution,
    SimulationError,
    SolverError,
    UnsupportedError,
    __version__,
    best_response,
    cmd_equilibrium,
    cmd_fairness,
    cmd_limits,
    cmd_simulate,
    cmd_sweep,
    cmd_validate,
    conditional_idleness,
    fluid_closed_form,
    run_simulation,
    solve_L,
    solve_equilibrium,
    stationary_scaled_idleness,
)

__all__ = [name for name in dir() if not name.startswith("_")]
