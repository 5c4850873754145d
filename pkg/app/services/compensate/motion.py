"""Motion recovery, the fiducial gate and trajectory re-targeting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from app.services.geom import PointCloud, RigidTransform, as_vec3
from app.services.planner import ScanWaypoint, Trajectory
from app.services.registration import CoarseParams, IcpParams, RegistrationResult, register_clouds
from app.utils.constants import EMC_GATE_MM
from app.utils.errors import CompensationRejectedError, InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("compensate")

MIN_MOTION_CLOUD_POINTS = 50


@dataclass(frozen=True, eq=False)
class BreakPoint:
    """Where scanning stopped: the last executed waypoint, its probe pose and sweep frame."""

    index: int
    pose: RigidTransform
    frame: int


@dataclass(frozen=True, eq=False)
class CompensationResult:
    transform: RigidTransform  # T_mc
    e_mc: float
    accepted: bool
    gate_mm: float = EMC_GATE_MM


def register_motion(
    cloud_before: PointCloud,
    cloud_after: PointCloud,
    icp_params: IcpParams | None = None,
    coarse_params: CoarseParams | None = None,
) -> RegistrationResult:
    """T_mc mapping the before-cloud onto the after-cloud, with its ICP telemetry."""
    for name, cloud in (("before", cloud_before), ("after", cloud_after)):
        if len(cloud) < MIN_MOTION_CLOUD_POINTS:
            raise InvalidArgumentError(
                f"{name}-motion cloud has {len(cloud)} points, at least {MIN_MOTION_CLOUD_POINTS} are needed"
            )
    result = register_clouds(cloud_before, cloud_after, icp_params, coarse_params)
    logger.info(
        f"[MOTION] recovered rotation {result.transform.rotation_angle_deg():.2f} deg, "
        f"translation {np.array2string(result.transform.translation, precision=2)} mm"
    )
    return result


def evaluate_emc(
    marker_before: ArrayLike,
    marker_after: ArrayLike,
    transform: RigidTransform,
    gate_mm: float = EMC_GATE_MM,
) -> CompensationResult:
    """e_mc = |P'_ar - T_mc(P_ar)|; accepted iff e_mc < gate."""
    predicted = transform.apply(as_vec3(marker_before))
    e_mc = float(np.linalg.norm(as_vec3(marker_after) - predicted))
    accepted = e_mc < gate_mm
    if accepted:
        logger.info(f"[GATE] e_mc = {e_mc:.2f} mm accepted (gate {gate_mm} mm)")
    else:
        logger.warning(f"[GATE] e_mc = {e_mc:.2f} mm rejected (gate {gate_mm} mm)")
    return CompensationResult(transform, e_mc, accepted, gate_mm)


def retarget_trajectory(trajectory: Trajectory, breakpoint: BreakPoint, result: CompensationResult) -> Trajectory:
    """Remaining waypoints from the break point on, moved by T_mc."""
    if not result.accepted:
        raise CompensationRejectedError(
            f"motion compensation error {result.e_mc:.2f} mm exceeds the {result.gate_mm} mm gate; sweep ended",
            {"e_mc_mm": result.e_mc, "gate_mm": result.gate_mm},
        )
    if not 0 <= breakpoint.index < len(trajectory):
        raise InvalidArgumentError(f"break point {breakpoint.index} outside the trajectory")
    waypoints = tuple(
        ScanWaypoint.from_pose(result.transform @ w.pose) for w in trajectory.waypoints[breakpoint.index :]
    )
    return Trajectory(waypoints, trajectory.spacing, trajectory.validate_spacing)
