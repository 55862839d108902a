"""Desk-scale numerical laboratory for branch-resolved wave packet dynamics.

The package builds one-dimensional quantum states on explicit grids,
propagates them with a short-time kernel realized as a band-limited
transfer step (with a sample-average Monte Carlo variant and a
Crank-Nicolson cross-check), studies how collective coordinates of N
microdegrees concentrate onto stationary paths, evolves a detector
pointer into well separated branches, and transports ensembles of
sample trajectories through the branching to collect outcome
statistics.
"""

__version__ = "0.1.0"

from . import errors
from .errors import (
    AliasingDetectedError,
    BasinBoundaryUnresolvedError,
    BoundaryContaminationError,
    BranchLabError,
    BranchLeftGridError,
    BranchesNotSeparatedError,
    CausticDetectedError,
    ConfigInvalidError,
    DensityTooLowError,
    DimensionTooLargeError,
    InsufficientFramesError,
    NeverSeparatesError,
    NewtonNoConvergenceError,
    NodeEncounteredError,
    NormDriftError,
    PacketOutsideGridError,
    PacketTooNarrowError,
    SolverDivergenceError,
    StderrDominatesError,
    TooFewSamplesError,
    UnresolvedPacketError,
    UnsupportedCaseError,
)
from .grids import (
    Potential,
    SpaceGrid,
    TimeGrid,
    WaveFunction,
    check_boundary,
    diagnostics,
    gaussian_packet,
    normalize,
    wavefunction_from_csv,
    wavefunction_to_csv,
)
from .pathsum import (
    MCPathSumResult,
    PathSumConfig,
    ShortTimeKernel,
    monte_carlo_path_sum,
    path_sum_step,
    propagate_pathsum,
)
from .reference import (
    ReferenceConfig,
    analytic_oracle,
    l2_distance,
    make_stepper,
    propagate_reference,
)
from .macro import (
    FluctuationWidth,
    JointWaveFunction,
    MacroSystem,
    StationaryPath,
    classical_limit_check,
    discrete_action,
    fluctuation_width,
    generalized_signal,
    signal_function,
    spreading_time,
    stationary_path,
)
from .measurement import (
    BranchSet,
    DetectorModel,
    branch_evolve,
    peak_weights,
    separation_time,
)
from .ensemble import (
    BranchReport,
    GuidanceFrames,
    SampleEnsemble,
    analyze_ensemble,
    branch_basins,
    build_guidance,
    equivariance_check,
    evolve_ensemble,
    guidance_velocity,
    kappa_profile,
    ks_statistic,
    labels_at_frame,
    time_average_fraction,
)
from .experiments import DEFAULT_CONFIG, default_config, resolve_config

__all__ = [
    "__version__",
    "errors",
    "AliasingDetectedError",
    "BasinBoundaryUnresolvedError",
    "BoundaryContaminationError",
    "BranchLabError",
    "BranchLeftGridError",
    "BranchesNotSeparatedError",
    "CausticDetectedError",
    "ConfigInvalidError",
    "DensityTooLowError",
    "DimensionTooLargeError",
    "InsufficientFramesError",
    "NeverSeparatesError",
    "NewtonNoConvergenceError",
    "NodeEncounteredError",
    "NormDriftError",
    "PacketOutsideGridError",
    "PacketTooNarrowError",
    "SolverDivergenceError",
    "StderrDominatesError",
    "TooFewSamplesError",
    "UnresolvedPacketError",
    "UnsupportedCaseError",
    "Potential",
    "SpaceGrid",
    "TimeGrid",
    "WaveFunction",
    "check_boundary",
    "diagnostics",
    "gaussian_packet",
    "normalize",
    "wavefunction_from_csv",
    "wavefunction_to_csv",
    "MCPathSumResult",
    "PathSumConfig",
    "ShortTimeKernel",
    "monte_carlo_path_sum",
    "path_sum_step",
    "propagate_pathsum",
    "ReferenceConfig",
    "analytic_oracle",
    "l2_distance",
    "make_stepper",
    "propagate_reference",
    "FluctuationWidth",
    "JointWaveFunction",
    "MacroSystem",
    "StationaryPath",
    "classical_limit_check",
    "discrete_action",
    "fluctuation_width",
    "generalized_signal",
    "signal_function",
    "spreading_time",
    "stationary_path",
    "BranchSet",
    "DetectorModel",
    "branch_evolve",
    "peak_weights",
    "separation_time",
    "BranchReport",
    "GuidanceFrames",
    "SampleEnsemble",
    "analyze_ensemble",
    "branch_basins",
    "build_guidance",
    "equivariance_check",
    "evolve_ensemble",
    "guidance_velocity",
    "kappa_profile",
    "ks_statistic",
    "labels_at_frame",
    "time_average_fraction",
    "DEFAULT_CONFIG",
    "default_config",
    "resolve_config",
]
