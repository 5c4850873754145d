"""In-plane orientation correction from a confidence map (barycenter, angle, lookahead)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.services.confidence.image import ConfidenceMap
from app.services.geom import rot_x
from app.services.planner import CalibrationSet, ScanWaypoint, Trajectory, waypoint_offsets
from app.utils.constants import CONFIDENCE_THRESHOLD, SHADOW_MIN_ANGLE_DEG, SHADOW_MIN_FRACTION
from app.utils.errors import InvalidArgumentError, NoSignalError, UndefinedAngleError
from app.utils.logger import get_logger

logger = get_logger("confidence.correction")


@dataclass(frozen=True)
class CorrectionResult:
    barycenter: tuple[float, float]  # (h, w) px
    angle_deg: float  # positive rolls toward small w
    shadow_detected: bool
    low_confidence_fraction: float


def binarize_map(confidence: ConfidenceMap, threshold: float = CONFIDENCE_THRESHOLD) -> NDArray[np.uint8]:
    """1 where the confidence reaches ``threshold``, else 0."""
    if not 0.0 < threshold < 1.0:
        raise InvalidArgumentError(f"confidence threshold must lie in (0, 1), got {threshold}")
    return (confidence.values >= threshold).astype(np.uint8)


def weighted_barycenter(grid: ArrayLike) -> tuple[float, float]:
    """Mass-weighted mean (h, w) of a non-negative grid (0-based indices)."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise InvalidArgumentError("barycenter needs a 2-D grid")
    total = grid.sum()
    if total <= 0:
        raise NoSignalError("the binary map has no confident pixels")
    rows = np.arange(grid.shape[0])
    cols = np.arange(grid.shape[1])
    h = float(grid.sum(axis=1) @ rows / total)
    w = float(grid.sum(axis=0) @ cols / total)
    return h, w


def correction_angle(barycenter: tuple[float, float], calib: CalibrationSet) -> float:
    """Angle (deg) between the ray from the top center to the barycenter and the image centerline.

    The lateral center is the middle pixel index (W - 1) / 2 in the barycenter's
    0-based convention; a uniform map gives exactly 0.

    Positive when the barycenter lies on the +Y_p side (small w).
    """
    h, w = barycenter
    if not (0.0 <= h <= calib.image_height_px - 1 and 0.0 <= w <= calib.image_width_px - 1):
        raise InvalidArgumentError(f"barycenter {barycenter} outside the image grid")
    if h == 0.0:
        raise UndefinedAngleError("barycenter on the transducer row")
    lateral = ((calib.image_width_px - 1) / 2.0 - w) * calib.lateral_mm_per_px
    axial = h * calib.axial_mm_per_px
    return float(np.degrees(np.arctan(lateral / axial)))


def evaluate_correction(
    confidence: ConfidenceMap,
    calib: CalibrationSet,
    threshold: float = CONFIDENCE_THRESHOLD,
    min_angle_deg: float = SHADOW_MIN_ANGLE_DEG,
    min_fraction: float = SHADOW_MIN_FRACTION,
) -> CorrectionResult:
    """Binarize, locate the barycenter and decide whether a shadow calls for correction."""
    binary = binarize_map(confidence, threshold)
    barycenter = weighted_barycenter(binary)
    angle = correction_angle(barycenter, calib)
    low_fraction = float(1.0 - binary.mean())
    detected = abs(angle) > min_angle_deg and low_fraction > min_fraction
    if detected:
        logger.debug(f"Shadow detected: correction={angle:.2f} deg, barycenter=({barycenter[0]:.1f}, {barycenter[1]:.1f})")
    return CorrectionResult(barycenter, angle, detected, low_fraction)


def lookahead_weights(distances: ArrayLike) -> NDArray[np.float64]:
    """Weights pair the nearest waypoint with the largest squared distance, normalised to sum to 1."""
    distances = np.asarray(distances, dtype=np.float64)
    if distances.ndim != 1 or len(distances) == 0:
        raise InvalidArgumentError("lookahead needs at least one distance")
    if np.any(distances <= 0):
        raise InvalidArgumentError("lookahead distances must be positive")
    squared = distances**2
    return squared[::-1] / squared.sum()


def _rotated(waypoint: ScanWaypoint, angle_deg: float) -> ScanWaypoint:
    return ScanWaypoint(waypoint.position, waypoint.rotation @ rot_x(angle_deg))


def update_lookahead(trajectory: Trajectory, current: int, angle_deg: float, lookahead: int) -> Trajectory:
    """Rotate waypoint ``current`` by the negated angle about its X axis and spread the correction ahead.

    Waypoint current + i gets its share of the rotation from ``lookahead_weights``; positions are untouched.
    """
    if not 0 <= current < len(trajectory):
        raise InvalidArgumentError(f"waypoint index {current} outside the trajectory")
    if lookahead < 1:
        raise InvalidArgumentError("lookahead must be at least 1")

    remaining = len(trajectory) - 1 - current
    if lookahead > remaining:
        logger.warning(f"lookahead {lookahead} exceeds the {remaining} remaining waypoints, clamping")
        lookahead = remaining

    updated = [_rotated(trajectory[current], -angle_deg)]
    if lookahead > 0:
        weights = lookahead_weights(waypoint_offsets(trajectory, current, lookahead))
        for i, eta in enumerate(weights, start=1):
            updated.append(_rotated(trajectory[current + i], -eta * angle_deg))
    return trajectory.replace(current, updated)
