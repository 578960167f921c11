"""Exception hierarchy shared by every module."""


class NoisyABCError(Exception):
    """Base class for all package errors."""


class DomainError(NoisyABCError, ValueError):
    """A parameter or auxiliary value lies outside its admissible set."""


class ConfigError(NoisyABCError, ValueError):
    """Invalid user configuration (bad epsilon, missing field, unknown model...)."""


class EvaluationError(NoisyABCError, FloatingPointError):
    """A model evaluation produced a non-finite value.

    The offending parameter vector and (a sample of) the latent state are kept
    on the instance for post-mortem inspection.
    """

    def __init__(self, message, theta=None, state=None):
        super().__init__(message)
        self.theta = theta
        self.state = state


class DegeneracyError(NoisyABCError, FloatingPointError):
    """Every particle weight underflowed to zero at some time step.

    Usually means epsilon is too small for the particle count. ``record`` is
    filled in by the estimation drivers with the partial run trace.
    """

    def __init__(self, message, step=None, theta=None, epsilon=None):
        super().__init__(message)
        self.step = step
        self.theta = theta
        self.epsilon = epsilon
        self.record = None
