"""Motion compensation, fine adjustment and compounding."""

from app.services.compensate.adjust import fine_adjust_poses, inplane_adjust, inplane_offset
from app.services.compensate.compound import (
    CompoundMode,
    CompoundVolume,
    compound_sweeps,
    polyline_distance,
    stitching_gap,
    vessel_rms_error,
)
from app.services.compensate.motion import (
    BreakPoint,
    CompensationResult,
    evaluate_emc,
    register_motion,
    retarget_trajectory,
)
from app.services.compensate.sweep import SweepFrame, SweepRecord, shift_positions

__all__ = [
    "fine_adjust_poses",
    "inplane_adjust",
    "inplane_offset",
    "CompoundMode",
    "CompoundVolume",
    "compound_sweeps",
    "polyline_distance",
    "stitching_gap",
    "vessel_rms_error",
    "BreakPoint",
    "CompensationResult",
    "evaluate_emc",
    "register_motion",
    "retarget_trajectory",
    "SweepFrame",
    "SweepRecord",
    "shift_positions",
]
