class SwitchNormError(Exception):
    pass


class ShapeError(SwitchNormError, ValueError):
    pass


class ParameterError(SwitchNormError, ValueError):
    pass


class ConfigurationError(SwitchNormError, ValueError):
    pass


class StateError(SwitchNormError, RuntimeError):
    pass


class DataError(SwitchNormError, ValueError):
    pass


class FormatError(SwitchNormError, ValueError):
    pass


class TrainingError(SwitchNormError, RuntimeError):
    """Raised when the loss becomes non-finite; ``step`` is the failing step."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step
