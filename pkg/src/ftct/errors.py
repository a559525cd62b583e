"""Exception hierarchy for the toolkit.

Every failure mode that callers are expected to handle gets its own type;
generic numerical trouble (NaNs from user callables, linalg breakdown)
is allowed to propagate as-is.
"""


class FtctError(Exception):
    """Base class for all toolkit errors."""


class InvalidVector(FtctError):
    """Non-finite or otherwise malformed vector input."""


class NormNotSmoothAtZero(FtctError):
    """Second-order norm data requested at (or too close to) v = 0."""


class StrongConvexityViolated(FtctError):
    """Fundamental tensor is numerically not positive definite."""


class ChartExit(FtctError):
    """A curve left the coordinate chart; carries the last position reached."""

    def __init__(self, position, message="curve left the chart domain"):
        super().__init__(f"{message} at {position}")
        self.position = position


class IntegrationFailure(FtctError):
    """Adaptive ODE integration failed (step size underflow or non-finite state)."""


class BvpNoConvergence(FtctError):
    """Geodesic shooting failed to converge from every available start."""


class DegenerateFlag(FtctError):
    """Flag plane is numerically degenerate (v, w nearly parallel)."""


class ProfileVanishes(FtctError):
    """Warping profile hits zero (or below) inside its domain."""


class RhoNotUnique(FtctError):
    """The profile derivative has more than one interior zero."""


class TruncationTooShort(FtctError):
    """A computation needs the model surface beyond its truncation radius."""


class NoComparisonTriangle(FtctError):
    """No angular separation in [0, pi] realizes the requested side length."""


class UnsupportedSurface(FtctError):
    """Operation requires a surface class (e.g. von Mangoldt) the input lacks."""


class PreconditionFailed(FtctError):
    """A documented operation precondition does not hold for the inputs."""


class HypothesisFailed(FtctError):
    """One or more comparison-theorem hypotheses fail; carries the list."""

    def __init__(self, failures):
        super().__init__("hypothesis check failed: " + "; ".join(failures))
        self.failures = list(failures)


class LimitNotResolved(FtctError):
    """A one-sided difference-quotient limit did not stabilize."""


class ConfigError(FtctError):
    """Malformed experiment configuration; carries a line number when known."""

    def __init__(self, message, line=None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line
