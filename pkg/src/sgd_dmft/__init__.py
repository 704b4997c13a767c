"""DMFT integration and finite-N simulation of SGD/GD signal-recovery dynamics."""

__version__ = "0.1.0"

from .core import (
    ConfigurationError,
    DmftParams,
    DmftState,
    NumericalFailure,
    PhysicalMonitorWarning,
    Series,
    TwoTimeGrid,
    init_state,
    msd,
)
from .selection import SelectionEnsemble, sample_trajectories
from .kernels import KernelRowPair, KernelWorkspace, lambda_row, solve_kernel_system
from .integrator import (
    IncrementTerms,
    build_increment_terms,
    dmft_step,
    integrate,
    omega_one,
    omega_two,
    step_with_kernels,
)
from .finiten import (
    Instance,
    SimParams,
    aggregate_series,
    generate_instance,
    loss,
    minibatch_gradient,
    recompute_labels,
    run_dynamics,
    run_reps,
)
from .effective import NoiseCovariance, noise_covariance, simulate_effective
from .analysis import PowerLawFit, TauPoint, fit_power_law, relaxation_time, run_sweep
