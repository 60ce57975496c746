"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented precondition or invariant."""


class UnsupportedSchemeError(ValidationError):
    """Operation called with a pulse scheme it does not support."""


class DegenerateFringeError(ValidationError):
    """Fringe has no measurable contrast, so its phase is undefined."""


class NoWindowError(RuntimeError):
    """Detuning window is empty: infidelity exceeds the threshold at zero offset."""


class ConvergenceError(RuntimeError):
    """Step refinement hit its cap without meeting the tolerance.

    Carries the last two refinement differences so the caller can judge how
    far from converged the run was.
    """

    def __init__(self, message, last_diff=None, prev_diff=None):
        super().__init__(message)
        self.last_diff = last_diff
        self.prev_diff = prev_diff
