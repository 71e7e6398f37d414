"""Exception hierarchy shared across the package."""


class HEError(Exception):
    """Base class for every error raised by hepoly."""


class ParameterError(HEError, ValueError):
    """Scheme parameters or key material are inconsistent."""


class InputError(HEError, ValueError):
    """An operation received a value it cannot work with."""


class PersistenceError(HEError):
    """A key, ciphertext, or model file could not be read or written."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        if field is not None and field not in message:
            message = f"{message} (field: {field})"
        super().__init__(message)


class ConfigError(HEError, ValueError):
    """An experiment configuration is not runnable."""


class TrainingDivergedError(HEError, ArithmeticError):
    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"training diverged (non-finite loss) at epoch {epoch}")
