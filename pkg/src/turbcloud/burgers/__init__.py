"""Two-way coupled 1-D Burgers gas and drag particles."""
from .core import (BurgersConfig, BurgersState, EulerianMomentState, admissible_dt, cell_counts, deposit_drag,
                   equispaced_positions, godunov_flux, histogram_state, homogeneous_discrete, homogeneous_solution,
                   initial_state, step_eulerian_empirical, step_homogeneous, step_lagrangian,
                   uniform_moment_state)
from .ensemble import (ConsistencyResult, EnsembleCurves, EnsembleResult, TauFit, deviation_metric,
                       ensemble_experiment, eulerian_consistency, fit_effective_tau, fit_tau_single,
                       golden_section, homogeneous_curve, relative_l2, run_ensemble, run_eulerian,
                       run_lagrangian)

__all__ = [
    "BurgersConfig", "BurgersState", "EulerianMomentState", "admissible_dt", "cell_counts", "deposit_drag",
    "equispaced_positions", "godunov_flux", "histogram_state", "homogeneous_discrete", "homogeneous_solution",
    "initial_state", "step_eulerian_empirical", "step_homogeneous", "step_lagrangian", "uniform_moment_state",
    "ConsistencyResult", "EnsembleCurves", "EnsembleResult", "TauFit", "deviation_metric",
    "ensemble_experiment", "eulerian_consistency", "fit_effective_tau", "fit_tau_single", "golden_section",
    "homogeneous_curve", "relative_l2", "run_ensemble", "run_eulerian", "run_lagrangian",
]
