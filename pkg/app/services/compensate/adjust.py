"""Two-step fine adjustment of the sweep recorded before a motion."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.services.compensate.sweep import SweepRecord, shift_positions
from app.services.geom import RigidTransform
from app.services.planner import CalibrationSet
from app.utils.errors import InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("compensate.adjust")


def fine_adjust_poses(
    sweep_before: SweepRecord,
    motion: RigidTransform,
    last_before: RigidTransform,
    first_after: RigidTransform,
) -> SweepRecord:
    """Move every before-pose by T_mc, then by the one rigid correction that overlaps the boundary frames.

    With delta = T_af_fi (T_mc T_be_la)^-1 each pose becomes delta T_mc T_be(i),
    so the last before-pose lands exactly on ``first_after``.
    """
    if sweep_before.is_empty:
        raise InvalidArgumentError("cannot adjust an empty sweep")
    delta = first_after @ (motion @ last_before).inverse()
    correction = delta @ motion
    logger.debug(
        f"Fine adjustment: residual correction {delta.rotation_angle_deg():.3f} deg, "
        f"{np.linalg.norm(delta.translation):.3f} mm"
    )
    return sweep_before.with_poses([correction @ pose for pose in sweep_before.poses])


def inplane_offset(
    centroid_before: ArrayLike,
    centroid_after: ArrayLike,
    calib: CalibrationSet,
    rotation: NDArray[np.float64],
) -> NDArray[np.float64]:
    """^b R (P_af - P_be) with both centroids (w, h) mapped to probe millimetres."""
    probe_points = calib.pixels_to_probe(np.vstack([centroid_after, centroid_before]))
    return np.asarray(rotation, dtype=np.float64) @ (probe_points[0] - probe_points[1])


def inplane_adjust(
    sweep_before: SweepRecord,
    centroid_before: tuple[float, float] | None,
    centroid_after: tuple[float, float] | None,
    calib: CalibrationSet,
    rotation: NDArray[np.float64],
) -> SweepRecord:
    """Shift the whole before-sweep so the two overlap-frame vessel centroids coincide."""
    if centroid_before is None or centroid_after is None:
        logger.warning("In-plane adjustment skipped: empty vessel mask in an overlap frame")
        return sweep_before
    offset = inplane_offset(centroid_before, centroid_after, calib, rotation)
    logger.info(f"In-plane adjustment of {np.linalg.norm(offset):.3f} mm")
    return shift_positions(sweep_before, offset)
