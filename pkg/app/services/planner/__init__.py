"""Trajectory planning: centerline, surface projection, orientation and the frame chain."""

from app.services.planner.calibration import (
    CalibrationSet,
    calibration_from_file,
    load_calibration,
    load_calibration_file,
)
from app.services.planner.centerline import extract_centerline, project_centerline_to_surface
from app.services.planner.hand_eye import HandEyeResult, hand_eye_calibrate
from app.services.planner.trajectory import (
    ScanWaypoint,
    Trajectory,
    orient_waypoints,
    path_tangents,
    read_trajectory_csv,
    transfer_trajectory,
    waypoint_offsets,
    write_trajectory_csv,
)

__all__ = [
    "CalibrationSet",
    "calibration_from_file",
    "load_calibration",
    "load_calibration_file",
    "extract_centerline",
    "project_centerline_to_surface",
    "HandEyeResult",
    "hand_eye_calibrate",
    "ScanWaypoint",
    "Trajectory",
    "orient_waypoints",
    "path_tangents",
    "read_trajectory_csv",
    "transfer_trajectory",
    "waypoint_offsets",
    "write_trajectory_csv",
]
