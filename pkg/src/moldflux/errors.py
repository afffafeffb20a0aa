"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid geometry, layout, schedule or config input. CLI exit code 2."""


class NumericalError(RuntimeError):
    """A linear solve failed or became untrustworthy. CLI exit code 3.

    Carries optional diagnostics (iteration counts, condition estimates)
    in ``details``.
    """

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = dict(details)
