"""Exception types raised across the package."""


class AadeimError(Exception):
    """Base class for all errors raised by this package."""


class NonFiniteError(AadeimError, ValueError):
    """A matrix or vector contains NaN or Inf entries."""


class SingularMatrixError(AadeimError):
    """A linear system is singular or too badly conditioned to solve."""

    def __init__(self, context, cond=None):
        self.context = context
        self.cond = cond
        self.step = None
        self.phase = None
        msg = f"singular matrix in {context}"
        if cond is not None:
            msg += f" (condition estimate {cond:.3e})"
        super().__init__(msg)

    def locate(self, step, phase):
        """Record where in a run the failure happened."""
        self.step = step
        self.phase = phase
        return self

    def __str__(self):
        msg = super().__str__()
        if self.step is not None:
            msg += f" at step {self.step} (phase {self.phase})"
        return msg


class ModelDivergenceError(AadeimError):
    """Time stepping produced a non-finite state."""

    def __init__(self, step, phase="full", detail=""):
        self.step = step
        self.phase = phase
        msg = f"divergence at step {step} (phase {phase})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class ConfigError(AadeimError, ValueError):
    """Invalid experiment or driver configuration."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column or 1}: {message}"
        super().__init__(message)
