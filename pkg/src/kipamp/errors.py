"""Exception hierarchy shared by the numerical modules and the CLI.

Each class carries the process exit code the CLI maps it to.
"""


class KipampError(Exception):
    exit_code = 3
    code = "ERR_NUMERIC"


class ConfigError(KipampError, ValueError):
    exit_code = 2
    code = "ERR_CONFIG"


class InfeasibleSplitError(KipampError, ValueError):
    """Observed mode splitting is smaller than the bare detuning."""

    code = "ERR_INFEASIBLE_SPLIT"


class ConvergenceError(KipampError):
    """No Newton seed (or fit) converged.

    ``partial`` holds whatever diagnostics the caller collected.
    """

    code = "ERR_NO_CONVERGENCE"

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NoStableStateError(KipampError):
    """Pump is beyond threshold on every branch that was examined."""

    exit_code = 4
    code = "ERR_ABOVE_THRESHOLD"

    def __init__(self, message, margin=None):
        super().__init__(message)
        self.margin = margin


class SingularError(KipampError):
    """(-i w I - Gamma) is singular at the requested offset."""

    code = "ERR_SINGULAR"


class BlowUpError(KipampError):
    """Time-domain amplitudes diverged (operating beyond threshold)."""

    exit_code = 4
    code = "ERR_BLOWUP"


class NotSettledError(KipampError):
    code = "ERR_NOT_SETTLED"


class CommensurabilityError(KipampError, ValueError):
    code = "ERR_WINDOW"


class SpectrumError(KipampError, ValueError):
    """Peak clipped by the grid, half maximum not bracketed, and similar."""

    code = "ERR_SPECTRUM"


class FitError(KipampError):
    code = "ERR_FIT"
