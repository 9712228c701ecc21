"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid solver, problem or experiment configuration."""


class UnsupportedConfigurationError(ConfigurationError):
    """A valid configuration that the requested routine cannot handle."""


class DivergenceError(RuntimeError):
    """A run produced non-finite or exploding iterates.

    The partial trace recorded before the failure is kept on ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
