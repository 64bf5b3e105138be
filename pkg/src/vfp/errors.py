"""Exception types shared across the library.

Every failure mode a caller may want to catch has its own class; the CLI maps
them onto exit codes (config errors 2, domain rejections 1, numerical
failures 3).
"""


class VfpError(Exception):
    """Base class for all library errors."""


class NonConvergence(VfpError):
    """Quadrature tolerance not met within the refinement budget."""


class NonFinite(VfpError):
    """Integrand returned NaN or infinity inside the truncation window."""


class RootFindingFailure(VfpError):
    """Bracketing plus polishing could not isolate a polynomial root."""


class UnboundedSup(VfpError):
    """A scan that must attain its supremum kept growing at the window edge."""


class BracketExhausted(VfpError):
    """No fixed point found in the scan bracket (existence violated)."""


class NoConvergence(VfpError):
    """Damped moment iteration did not settle within the iteration budget."""


class DivergentIntegrand(VfpError):
    """Exponent of the half-line integrand does not decay (bad well profile)."""


class NoSignChange(VfpError):
    """Root bracketing failed: the function never changes sign on the window."""


class NoTransition(VfpError):
    """The map derivative stays below one: no phase transition at this coupling."""


class GridTooCoarse(VfpError):
    """Finite-difference grid below the supported minimum resolution."""


class ConditionViolated(VfpError):
    """A stated hypothesis (well depth, curvature sign) does not hold."""


class BlowUp(VfpError):
    """A particle coordinate left the sane range; the time step is too large."""

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index


class ConfigError(VfpError):
    """Malformed or unknown configuration input."""
