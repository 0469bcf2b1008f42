"""Exception hierarchy shared by all tracker components."""


class TrackerError(Exception):
    """Base class for every error raised by vtrack."""


class InvalidBox(TrackerError, ValueError):
    pass


class OutOfFrame(TrackerError, ValueError):
    pass


class NonPositiveScale(TrackerError, ValueError):
    pass


class UnsupportedChannelCount(TrackerError, ValueError):
    pass


class EmptyTarget(TrackerError, ValueError):
    pass


class WrongPatchShape(TrackerError, ValueError):
    pass


class DegenerateWeights(TrackerError, ValueError):
    pass


class DimensionMismatch(TrackerError, ValueError):
    pass


class NonFiniteGradient(TrackerError, ArithmeticError):
    pass


class SolverFailure(TrackerError, ArithmeticError):
    pass


class TrueBoxMissing(TrackerError, ValueError):
    pass


class SamplingExhausted(TrackerError, RuntimeError):
    pass


class MissingNegatives(TrackerError, ValueError):
    pass


class EmptyInput(TrackerError, ValueError):
    pass


class LengthMismatch(TrackerError, ValueError):
    pass


class EmptySelection(TrackerError, ValueError):
    pass


class MissingGroundTruth(TrackerError, FileNotFoundError):
    pass


class CountMismatch(TrackerError, ValueError):
    pass


class UnparsableLine(TrackerError, ValueError):
    def __init__(self, line_number: int, text: str, path=None):
        self.line_number = line_number
        self.text = text
        self.path = path
        where = f"{path}:" if path else "line "
        super().__init__(f"{where}{line_number}: cannot parse box from {text!r}")


class SpecOutOfBounds(TrackerError, ValueError):
    pass


class ConfigParseError(TrackerError, ValueError):
    pass


class DatasetNotFound(TrackerError, FileNotFoundError):
    pass


class UnknownMethod(TrackerError, ValueError):
    pass
