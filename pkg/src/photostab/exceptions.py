"""Exception and warning types raised by the solvers."""


class SolverError(RuntimeError):
    """Base class for numerical failures in the solver pipeline."""


class NonConvergenceError(SolverError):
    """Nonlinear iteration failed to reach tolerance within its cap.

    Carries the residual history of the failed run in ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class InconsistentStateError(SolverError):
    """A basic state does not satisfy its defining equations on the grid."""


class DimensionMismatchError(ValueError):
    """Grid size of a state disagrees with the resolution in the parameters."""


class EigensolverError(SolverError):
    """The dense generalized eigensolver failed."""


class AllSpuriousError(SolverError):
    """Spurious-mode filtering rejected every eigenvalue candidate."""


class NoMatchingEigenvalueError(ValueError):
    """No computed eigenvalue lies within tolerance of the requested target."""


class NoRootInRangeError(ValueError):
    """The taxis response has no zero crossing in the admissible interval."""


class CriticalIntensityRangeError(ValueError):
    """Requested critical intensity lies outside the invertible window."""


class BracketExpansionError(SolverError):
    """Bracket expansion failed to enclose a sign change of the growth rate."""


class WindowTooNarrowError(SolverError):
    """The neutral-curve minimum abuts the upper edge of the wavenumber window."""


class StationaryModeError(ValueError):
    """An oscillation-cycle operation was requested for a stationary mode."""


class BetaRangeWarning(UserWarning):
    """Taxis steepness lies outside the calibrated range [-1.1, 1.1]."""


class NonMonotoneWarning(UserWarning):
    """Multiple growth-rate sign changes detected inside one bracket."""
