"""Error types shared by every pipeline stage.

Each error carries a stable machine-readable ``code`` (mirroring the codes of
the structured error responses) and optional ``details`` so that stage failures
can be recorded in session reports.
"""

from typing import Any

from app.schemas.common import ErrorDetail


class ScanPilotError(Exception):
    """Base class for all expected pipeline failures."""

    code = "INTERNAL_ERROR"

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_error_detail(self) -> ErrorDetail:
        return ErrorDetail(code=self.code, message=self.message, details=self.details or None)


class InvalidArgumentError(ScanPilotError, ValueError):
    code = "INVALID_ARGUMENT"


class DegenerateInputError(ScanPilotError, ValueError):
    code = "DEGENERATE_INPUT"


class DegenerateFrameError(ScanPilotError):
    code = "DEGENERATE_FRAME"


class CoarseAlignmentError(ScanPilotError):
    code = "COARSE_ALIGNMENT_FAILED"


class RegistrationFailedError(ScanPilotError):
    code = "REGISTRATION_FAILED"

    def __init__(self, message: str, mse_history: list[float] | None = None):
        super().__init__(message, {"mse_history": list(mse_history or [])})
        self.mse_history = list(mse_history or [])


class NumericalFailureError(ScanPilotError):
    code = "NUMERICAL_FAILURE"

    def __init__(self, message: str, residual: float):
        super().__init__(message, {"residual": residual})
        self.residual = residual


class NoSignalError(ScanPilotError):
    code = "NO_SIGNAL"


class UndefinedAngleError(ScanPilotError):
    code = "UNDEFINED_ANGLE"


class UndefinedDiceError(ScanPilotError):
    code = "UNDEFINED_DICE"


class EmptyCloudError(ScanPilotError):
    code = "EMPTY_CLOUD"


class EmptyViewError(ScanPilotError):
    code = "EMPTY_VIEW"


class ContactLostError(ScanPilotError):
    code = "CONTACT_LOST"


class CompensationRejectedError(ScanPilotError):
    code = "COMPENSATION_REJECTED"


class UndefinedGapError(ScanPilotError):
    code = "UNDEFINED_GAP"
