"""Exception types shared across the package."""


class BkcError(Exception):
    """Base class for all package-specific failures."""


class SingularMatrixError(BkcError):
    """Linear system is singular or too ill-conditioned to solve reliably."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class EigenConvergenceError(BkcError):
    """Eigenvalue iteration did not converge within its budget."""


class NonHurwitzError(BkcError):
    """Generator has an eigenvalue with non-negative real part (unstable chain)."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class CurveTouchesReferenceError(BkcError):
    """Winding curve passes within tolerance of the reference point."""


class InsufficientSamplingError(BkcError):
    """A phase increment between winding samples exceeds pi/2."""


class NonIntegerWindingError(BkcError):
    """Accumulated phase did not snap to an integer multiple of 2*pi."""


class CoalescentTransformError(BkcError):
    """Local quadrature eigenvectors coalesce (|y| = 1); the transform is defective."""


class PhaseBoundaryError(BkcError):
    """Parameters sit on a phase boundary where the requested invariant is undefined."""


class BandTrackingError(BkcError):
    """Band continuity tracking is ambiguous (bands touch on the k grid)."""


class ResonanceSingularityError(SingularMatrixError):
    """Probe frequency coincides with an undamped resonance of the chain."""


class UnstableChainError(BkcError):
    """Operation requires a dynamically stable chain."""


class OffMagicDetuningError(BkcError):
    """Cubic-only force expansion requested away from the maximum-spring-shift detuning."""

    def __init__(self, message, h2=None):
        super().__init__(message)
        self.h2 = h2


class CommensurateFrequencyError(BkcError):
    """Mode frequencies satisfy an accidental integer relation."""

    def __init__(self, message, relation=None):
        super().__init__(message)
        self.relation = relation


class NotSettledError(BkcError):
    """Trajectory has not reached a steady oscillation in the analysis window."""


class ScheduleError(BkcError):
    """Tone schedule cannot be realized."""


class FrequencyCollisionError(ScheduleError):
    """Two scheduled tones (or a tone and a local oscillator) share a frequency."""


class InsufficientSpringShiftError(ScheduleError):
    """Requested coupling needs a modulation depth above unity."""


class MissingOscillatorError(ScheduleError):
    """Phase bookkeeping refers to a local oscillator that is not in the table."""


class InfeasiblePlanError(ScheduleError):
    """Oscillator capacity cannot accommodate the requested modes and tones."""


class SchemaError(BkcError):
    """Scenario configuration violates the documented schema."""
