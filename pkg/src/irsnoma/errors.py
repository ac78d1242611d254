"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """An infeasible or malformed scenario parameter."""


class RejectedRealization(RuntimeError):
    """A channel draw that cannot be detected (ill-conditioned Gram matrices).

    The engine counts these and drops the trial.
    """
