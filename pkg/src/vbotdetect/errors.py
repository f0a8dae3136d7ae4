"""Exception types raised across the package."""


class VbotError(Exception):
    """Base class for every error raised by vbotdetect."""


class FrameError(VbotError):
    pass


class MalformedFrameError(FrameError):
    pass


class LengthMismatchError(FrameError):
    pass


class LengthOverflowError(FrameError):
    pass


class TraceFormatError(VbotError):
    pass


class TraceOrderError(TraceFormatError):
    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"timestamps decrease at record {index}")


class ConfigError(VbotError):
    pass


class EmptyDatasetError(VbotError):
    pass


class SelectionError(VbotError):
    pass


class TrainingError(VbotError):
    pass


class InferenceError(VbotError):
    pass


class PipelineError(VbotError):
    pass


class StageError(VbotError):
    """An experiment stage failed; ``stage`` names which one."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
