"""Calibration chain: flange -> probe -> image pixels."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import ValidationError

from app.schemas.calibration import CalibrationFile
from app.services.geom import RigidTransform, Vec3, transform_from_spec
from app.utils.errors import InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("planner.calibration")


@dataclass(frozen=True)
class CalibrationSet:
    """Probe geometry plus the fixed transforms of the frame chain.

    Pixels are (w, h): w is the 0-based column along the transducer, h the
    0-based row away from it. The image plane is the Y_p-Z_p plane of the probe.
    """

    flange_to_probe: RigidTransform  # probe in flange frame
    hand_eye: RigidTransform  # camera in base frame
    probe_length_mm: float = 37.5
    imaging_depth_mm: float = 55.0
    image_width_px: int = 375
    image_height_px: int = 550
    depth_offset_mm: float = 0.0

    def __post_init__(self) -> None:
        if self.probe_length_mm <= 0 or self.imaging_depth_mm <= 0:
            raise InvalidArgumentError("probe length and imaging depth must be positive")
        if self.image_width_px < 1 or self.image_height_px < 1:
            raise InvalidArgumentError("image dimensions must be at least 1 px")
        if not np.allclose(self.flange_to_probe.rotation, np.eye(3), atol=1e-9):
            raise InvalidArgumentError("the rotation of the flange-to-probe transform must be identity")

    @classmethod
    def default(cls) -> CalibrationSet:
        return calibration_from_file(CalibrationFile())

    @property
    def lateral_mm_per_px(self) -> float:
        return self.probe_length_mm / self.image_width_px

    @property
    def axial_mm_per_px(self) -> float:
        return self.imaging_depth_mm / self.image_height_px

    @property
    def image_shape(self) -> tuple[int, int]:
        """(height, width) for numpy image arrays."""
        return self.image_height_px, self.image_width_px

    def image_to_probe_matrix(self) -> NDArray[np.float64]:
        """Homogeneous map from (0, w, h, 1) to probe coordinates (mm)."""
        return np.array(
            [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, -self.lateral_mm_per_px, 0.0, self.probe_length_mm / 2.0],
                [0.0, 0.0, self.axial_mm_per_px, self.depth_offset_mm],
                [0.0, 0.0, 0.0, 1.0],
            ]
        )

    def pixels_to_probe(self, pixels: ArrayLike, check: bool = True) -> NDArray[np.float64]:
        """Pixel to probe frame for an (N, 2) array of (w, h)."""
        pixels = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
        if pixels.shape[1] != 2:
            raise InvalidArgumentError(f"pixels must have shape (N, 2), got {pixels.shape}")
        w, h = pixels[:, 0], pixels[:, 1]
        if check and (
            np.any(w < 0) or np.any(w > self.image_width_px) or np.any(h < 0) or np.any(h > self.image_height_px)
        ):
            raise InvalidArgumentError(
                f"pixel outside [0, {self.image_width_px}] x [0, {self.image_height_px}]"
            )
        homogeneous = np.column_stack([np.zeros(len(w)), w, h, np.ones(len(w))])
        return (homogeneous @ self.image_to_probe_matrix().T)[:, :3]

    def pixel_to_probe(self, pixel: ArrayLike) -> Vec3:
        """Probe-frame position (mm) of a (w, h) pixel."""
        return self.pixels_to_probe(np.reshape(np.asarray(pixel, dtype=np.float64), (1, 2)))[0]

    def probe_to_pixels(self, points: ArrayLike) -> NDArray[np.float64]:
        """Inverse of pixels_to_probe for in-plane probe coordinates; returns (N, 2) of (w, h)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        w = (self.probe_length_mm / 2.0 - points[:, 1]) / self.lateral_mm_per_px
        h = (points[:, 2] - self.depth_offset_mm) / self.axial_mm_per_px
        return np.column_stack([w, h])

    def pixel_to_base(self, pixel: ArrayLike, probe_pose: RigidTransform) -> Vec3:
        """Base-frame position of a pixel imaged from ``probe_pose``."""
        return probe_pose.apply(self.pixel_to_probe(pixel))

    def pixels_to_base(self, pixels: ArrayLike, probe_pose: RigidTransform) -> NDArray[np.float64]:
        return probe_pose.apply(self.pixels_to_probe(pixels))

    def probe_pose_from_flange(self, flange_pose: RigidTransform) -> RigidTransform:
        """Probe pose in the base frame from the flange pose."""
        return flange_pose @ self.flange_to_probe

    def flange_pose_from_probe(self, probe_pose: RigidTransform) -> RigidTransform:
        return probe_pose @ self.flange_to_probe.inverse()


def calibration_from_file(document: CalibrationFile) -> CalibrationSet:
    hand_eye_spec = document.hand_eye if document.hand_eye is not None else document.camera.pose
    return CalibrationSet(
        flange_to_probe=RigidTransform.from_translation(document.flange_to_probe),
        hand_eye=transform_from_spec(hand_eye_spec),
        probe_length_mm=document.probe_length_mm,
        imaging_depth_mm=document.imaging_depth_mm,
        image_width_px=document.image_width_px,
        image_height_px=document.image_height_px,
        depth_offset_mm=document.depth_offset_mm,
    )


def load_calibration_file(path: str | Path) -> CalibrationFile:
    """Parse and validate a JSON calibration file."""
    path = Path(path)
    try:
        document = CalibrationFile.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise InvalidArgumentError(f"calibration file {path} not found") from e
    except ValidationError as e:
        raise InvalidArgumentError(f"invalid calibration file {path}", {"errors": json.loads(e.json())}) from e
    logger.info(f"Loaded calibration from {path}")
    return document


def load_calibration(path: str | Path) -> CalibrationSet:
    return calibration_from_file(load_calibration_file(path))
