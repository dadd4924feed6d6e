"""Exception types shared across the package.

Everything raised on purpose derives from VglLabError so callers (and the CLI)
can distinguish our failures from genuine bugs.
"""


class VglLabError(Exception):
    """Base class for all vgl-lab errors."""


class ConfigError(VglLabError):
    """Malformed or inconsistent run configuration."""


class EnvironmentDefinitionError(VglLabError):
    """An environment produced a non-finite state or reward."""


class TerminalStateError(VglLabError):
    """step() was called on a terminal state."""


class EpisodicViolationError(VglLabError):
    """A rollout failed to terminate within the environment's horizon bound."""


class DimensionMismatchError(VglLabError):
    """A weight or state vector has the wrong length."""


class SolverFailureError(VglLabError):
    """The greedy action solver could not certify a maximum.

    Carries diagnostics: the state, the best projected-gradient norm reached,
    and the iteration count.
    """

    def __init__(self, message, *, state=None, grad_norm=None, iterations=None):
        super().__init__(message)
        self.state = state
        self.grad_norm = grad_norm
        self.iterations = iterations


class DerivativeUndefinedError(VglLabError):
    """A policy derivative does not exist at this point (singular or
    near-singular restricted action Hessian)."""


class TargetUndefinedError(VglLabError):
    """Gradient targets are undefined because a policy Jacobian does not
    exist at some step; names the step."""

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


class SaturationUnsupportedError(VglLabError):
    """An operation that requires fully interior actions met a saturated one."""


class OmegaSingularError(VglLabError):
    """The pgl omega matrix cannot be formed (ill-conditioned action Hessian)."""
