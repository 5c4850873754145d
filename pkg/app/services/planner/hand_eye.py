"""Hand-eye calibration from paired marker positions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from app.services.geom import RigidTransform, best_fit_transform
from app.utils.errors import DegenerateInputError, InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("planner.hand_eye")


@dataclass(frozen=True)
class HandEyeResult:
    transform: RigidTransform  # base from camera
    residual_rms_mm: float
    pairs: int


def hand_eye_calibrate(pairs: Sequence[tuple[ArrayLike, ArrayLike]]) -> HandEyeResult:
    """Least-squares base-from-camera transform from (camera-frame, base-frame) point pairs."""
    if len(pairs) < 3:
        raise InvalidArgumentError("hand-eye calibration needs at least 3 point pairs")
    camera = np.array([p[0] for p in pairs], dtype=np.float64).reshape(-1, 3)
    base = np.array([p[1] for p in pairs], dtype=np.float64).reshape(-1, 3)

    singular = np.linalg.svd(camera - camera.mean(axis=0), compute_uv=False)
    if singular[0] == 0 or singular[1] <= 1e-9 * singular[0]:
        raise DegenerateInputError("calibration points are collinear", {"singular_values": singular.tolist()})

    transform = best_fit_transform(camera, base)
    residual = float(np.sqrt(np.mean(np.sum((transform.apply(camera) - base) ** 2, axis=1))))
    logger.info(f"Hand-eye calibration from {len(camera)} pairs: residual RMS {residual:.3f} mm")
    return HandEyeResult(transform=transform, residual_rms_mm=residual, pairs=len(camera))
