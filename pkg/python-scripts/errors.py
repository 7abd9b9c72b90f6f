"""Exception hierarchy for traffic-matrix decomposition."""


class TrafficDecompositionError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TrafficDecompositionError, ValueError):
    """Invalid configuration document or parameter."""

    def __init__(self, message: str, key_path: str | None = None):
        self.key_path = key_path
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)


class DataError(TrafficDecompositionError, ValueError):
    """Input data does not satisfy an operation's preconditions."""


class LengthNotDivisibleError(DataError):
    def __init__(self, length: int, levels: int):
        self.length = length
        self.levels = levels
        super().__init__(
            f"signal length T={length} is not divisible by 2^J={2**levels} (J={levels})"
        )


class InvalidLevelError(DataError):
    pass


class SignalTooShortError(DataError):
    pass


class LevelMismatchError(DataError):
    pass


class DimensionError(DataError):
    pass


class NonFiniteInputError(DataError):
    pass


class ZeroDenominatorError(DataError):
    def __init__(self, component: str):
        self.component = component
        super().__init__(
            f"ground-truth component {component} has zero Frobenius norm; "
            f"accuracy({component}) is undefined"
        )


class InfeasibleTopologyError(DataError):
    pass


class MatrixParseError(DataError):
    def __init__(self, path: str, row: int, column: int, value: str):
        self.row = row
        self.column = column
        super().__init__(
            f"{path}: cannot parse value {value!r} at row {row}, column {column}"
        )


class NumericalError(TrafficDecompositionError, ArithmeticError):
    """A numerical routine failed or produced an inconsistent result."""


class SvdFailureError(NumericalError):
    def __init__(self, shape: tuple[int, ...], reason: str):
        self.shape = shape
        super().__init__(f"SVD failed for {shape[0]}x{shape[1]} matrix: {reason}")


class InvariantViolationError(NumericalError):
    pass
