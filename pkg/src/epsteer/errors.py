"""Exception and warning types shared across the package."""


class EpsteerError(Exception):
    """Base class for all package-specific errors."""


class InputError(EpsteerError, ValueError):
    """Invalid argument: non-finite scalar, malformed array, bad enum value."""


class DegeneracyError(EpsteerError):
    """Matrix is defective or too close to an exceptional point to diagonalize."""


class StepError(EpsteerError):
    """A propagation step cannot be represented (e.g. exponential overflow)."""


class InvalidStateError(EpsteerError):
    """An evolution state violates its invariants (e.g. all-zero coefficients)."""


class SchedulerError(EpsteerError):
    """No dwell time can meet the requested dominant-state proportion."""


class ConfigError(EpsteerError, ValueError):
    """Run configuration is malformed; message carries the offending field path."""


class DwellCapWarning(UserWarning):
    """A solved dwell time exceeded the configured cap and was clamped."""


class PinningExemptionWarning(UserWarning):
    """The stable walk could not pin the closing degenerate-axis point and
    emitted a zero dwell there instead."""


class RefinementWarning(UserWarning):
    """Local refinement failed to improve on its starting point."""
