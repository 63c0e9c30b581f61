"""Exception hierarchy shared by every quadtwist module."""


class QuadTwistError(Exception):
    """Base class for all errors raised by this package."""


class GimbalLock(QuadTwistError):
    """Euler-rate map is singular (pitch too close to +/- 90 deg)."""


class SingularInertia(QuadTwistError):
    """Inertia matrix cannot be inverted reliably."""


class Unrealizable(QuadTwistError):
    """Requested torques need motor thrusts outside [0, f_max].

    The raw (unclamped) thrusts are kept on ``forces`` so callers can
    report how far out of range they were.
    """

    def __init__(self, message, forces=None):
        super().__init__(message)
        self.forces = forces


class NumericalBlowup(QuadTwistError):
    """State became non-finite or left the sane magnitude range."""


class WindowTooShort(QuadTwistError):
    """Log does not cover the analysis window."""


class MismatchedScenario(QuadTwistError):
    """Logs being compared were not produced by the same scenario."""


class ParseError(QuadTwistError):
    """Scenario file is malformed."""


class ValidationError(QuadTwistError):
    """A configuration value breaks a documented invariant."""


class UnknownPreset(QuadTwistError):
    """Scenario name is neither a preset nor an existing file."""


class MissingData(QuadTwistError):
    """Nothing to plot or analyse."""
