"""Exception types shared across the package."""


class EsdmError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(EsdmError, ValueError):
    """An argument violates a documented precondition."""


class ConfigError(EsdmError, ValueError):
    """A configuration file failed to parse or validate."""


class NumericFailureError(EsdmError, RuntimeError):
    """A numerical routine failed after bounded effort."""


class BlowUpError(NumericFailureError):
    """Integration produced a non-finite or absurdly large state.

    Attributes
    ----------
    step : int
        Index of the step at which the blow-up was detected.
    path : int or None
        Ensemble path index, when integrating more than one path.
    """

    def __init__(self, step, path=None):
        self.step = step
        self.path = path
        where = f"step {step}" if path is None else f"path {path}, step {step}"
        super().__init__(f"state blew up at {where} "
                         "(non-finite or magnitude above 1e12)")
