"""Exception types shared across the package.

Every exception carries a short machine-readable ``code`` so that callers
(and the command line driver in particular) can report failures uniformly
without parsing message strings.
"""

from __future__ import annotations


class BranchLabError(Exception):
    """Base class for all package errors."""

    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


# grid / wave-function construction

class PacketTooNarrowError(BranchLabError):
    code = "packet-too-narrow"


class PacketOutsideGridError(BranchLabError):
    code = "packet-outside-grid"


class BoundaryContaminationError(BranchLabError):
    """Amplitude leaked into the outer edge of the box during a run."""

    code = "boundary-contaminated"


# path-sum propagation

class AliasingDetectedError(BranchLabError):
    """State carries spectral weight beyond the resolvable grid band."""

    code = "aliasing-detected"


class NormDriftError(BranchLabError):
    code = "norm-drift"


class DensityTooLowError(BranchLabError):
    code = "density-too-low"


class StderrDominatesError(BranchLabError):
    """Monte Carlo estimate is smaller than its own standard error everywhere."""

    code = "stderr-dominates"


# reference solver

class SolverDivergenceError(BranchLabError):
    code = "solver-divergence"


class UnsupportedCaseError(BranchLabError):
    code = "unsupported-case"


# macrovariable dynamics

class NewtonNoConvergenceError(BranchLabError):
    code = "newton-no-convergence"

    def __init__(self, message: str = "", last_residual: float | None = None):
        super().__init__(message)
        self.last_residual = last_residual


class CausticDetectedError(BranchLabError):
    """Second variation of the action is singular along the solved path."""

    code = "caustic-detected"


class DimensionTooLargeError(BranchLabError):
    code = "dimension-too-large"


# measurement / detector model

class BranchLeftGridError(BranchLabError):
    code = "branch-left-grid"


class UnresolvedPacketError(BranchLabError):
    code = "unresolved-packet"


class BranchesNotSeparatedError(BranchLabError):
    code = "branches-not-separated"


class NeverSeparatesError(BranchLabError):
    code = "never-separates"


# trajectory ensembles

class NodeEncounteredError(BranchLabError):
    code = "node-encountered"


class InsufficientFramesError(BranchLabError):
    code = "insufficient-frames"


class TooFewSamplesError(BranchLabError):
    code = "too-few-samples"


class BasinBoundaryUnresolvedError(BranchLabError):
    code = "basin-boundary-unresolved"


# command line driver

class ConfigInvalidError(BranchLabError):
    code = "config-invalid"
