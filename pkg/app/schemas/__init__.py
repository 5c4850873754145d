"""Pydantic schemas for config documents and reports"""

from app.schemas.common import ErrorDetail, TransformSpec, Vector3
from app.schemas.calibration import CalibrationFile, CameraSpec
from app.schemas.phantom import FiducialSpec, PhantomParams, PlacementSpec
from app.schemas.motion import MotionEventSpec, MotionScriptSpec, RandomMotionSpec
from app.schemas.session import (
    CompoundReport,
    ConfidenceSpec,
    ContactSpec,
    MotionRecord,
    NoiseSpec,
    PhantomReport,
    PlanReport,
    RegistrationRecord,
    ReplayReport,
    SamplingSpec,
    ScanReport,
    SessionConfig,
    SessionReport,
    ThresholdSpec,
    ToggleSpec,
)

__all__ = [
    # Common
    "ErrorDetail",
    "TransformSpec",
    "Vector3",
    # Calibration
    "CalibrationFile",
    "CameraSpec",
    # Phantom
    "FiducialSpec",
    "PhantomParams",
    "PlacementSpec",
    # Motion
    "MotionEventSpec",
    "MotionScriptSpec",
    "RandomMotionSpec",
    # Session
    "CompoundReport",
    "ConfidenceSpec",
    "ContactSpec",
    "MotionRecord",
    "NoiseSpec",
    "PhantomReport",
    "PlanReport",
    "RegistrationRecord",
    "ReplayReport",
    "SamplingSpec",
    "ScanReport",
    "SessionConfig",
    "SessionReport",
    "ThresholdSpec",
    "ToggleSpec",
]
