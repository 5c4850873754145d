"""Schemas for the calibration file"""

import math

from pydantic import BaseModel, Field, field_validator

from app.schemas.common import TransformSpec, Vector3
from app.utils.constants import (
    DEPTH_OFFSET_MM,
    IMAGE_HEIGHT_PX,
    IMAGE_WIDTH_PX,
    IMAGING_DEPTH_MM,
    PROBE_LENGTH_MM,
)

# Straight down onto the table: camera Z along -Z_b, camera X along +X_b.
DEFAULT_CAMERA_POSE = TransformSpec(
    rotation=[[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]],
    translation=(0.0, 0.0, 700.0),
)


class CameraSpec(BaseModel):
    """Pinhole RGB-D camera: intrinsics (px), resolution and pose in the base frame"""
    fx: float = Field(default=525.0, gt=0)
    fy: float = Field(default=525.0, gt=0)
    cx: float = 319.5
    cy: float = 239.5
    width: int = Field(default=640, ge=1)
    height: int = Field(default=480, ge=1)
    pose: TransformSpec = DEFAULT_CAMERA_POSE


class CalibrationFile(BaseModel):
    """Probe geometry, flange offset, hand-eye transform and camera"""
    probe_length_mm: float = Field(default=PROBE_LENGTH_MM, gt=0, description="flange-side probe length")
    imaging_depth_mm: float = Field(default=IMAGING_DEPTH_MM, gt=0, description="imaging depth of the B-mode frame")
    image_width_px: int = Field(default=IMAGE_WIDTH_PX, ge=1, description="frame width in pixels")
    image_height_px: int = Field(default=IMAGE_HEIGHT_PX, ge=1, description="frame height in pixels")
    depth_offset_mm: float = Field(default=DEPTH_OFFSET_MM, description="depth offset between the transducer face and the first row")
    flange_to_probe: Vector3 = Field(
        default=(0.0, 0.0, 150.0), description="flange-to-probe translation; the rotation is identity"
    )
    hand_eye: TransformSpec | None = Field(
        default=None, description="base-from-camera transform; defaults to the camera pose"
    )
    camera: CameraSpec = CameraSpec()
    table_normal: Vector3 = (0.0, 0.0, 1.0)

    @field_validator("table_normal")
    @classmethod
    def table_parallel_to_ground(cls, value: Vector3) -> Vector3:
        norm = math.sqrt(sum(c * c for c in value))
        if norm == 0 or value[2] / norm < 1.0 - 1e-6:
            raise ValueError("table normal must be parallel to +Z_b; tilted tables are not supported")
        return value
