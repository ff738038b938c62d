"""
Exception types shared by the engine, the model and the command line.
"""

from typing import Optional, Sequence


class URMError(Exception):
    """Base class for all errors raised by this package"""


class DimensionError(URMError, ValueError):
    """Shape or width mismatch between operands"""

    def __init__(self, message: str, *shapes: Sequence[int]):
        if shapes:
            rendered = " vs ".join(str(tuple(s)) for s in shapes)
            message = f"{message}: {rendered}"
        super().__init__(message)
        self.shapes = tuple(tuple(s) for s in shapes)


class ContractError(URMError, ValueError):
    """A documented precondition was violated by the caller"""


class ParseError(URMError, ValueError):
    """Malformed file content; offset is a byte offset or a line number"""

    def __init__(self, message: str, offset: Optional[int] = None, unit: str = "byte"):
        if offset is not None:
            message = f"{message} (at {unit} {offset})"
        super().__init__(message)
        self.offset = offset


class ConfigError(URMError, ValueError):
    """Invalid or unknown configuration key"""

    def __init__(self, message: str, key: Optional[str] = None):
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)
        self.key = key


class DivergenceError(URMError, RuntimeError):
    """Training produced a non-finite loss"""

    def __init__(self, step: int, loss: float):
        super().__init__(f"loss became non-finite ({loss}) at step {step}")
        self.step = step
        self.loss = loss


class SegmentTooEarlyError(URMError):
    """The observation window would start before the recording does"""
