"""Scan waypoints, trajectories and their transfer through the frame chain."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, overload

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.services.geom import PointCloud, RigidTransform, Vec3, knn_search
from app.utils.errors import DegenerateFrameError, InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("planner.trajectory")

# Allowed consecutive spacing, as multiples of the nominal spacing.
SPACING_BOUNDS = (0.2, 5.0)
NORMAL_ALIGNMENT = -0.99
TRAJECTORY_HEADER = "index,x,y,z,qx,qy,qz,qw"


@dataclass(frozen=True, eq=False)
class ScanWaypoint:
    """Probe target in the base frame: X_p, Y_p, Z_p are the columns of ``rotation``."""

    position: Vec3
    rotation: NDArray[np.float64]

    def __post_init__(self) -> None:
        # RigidTransform validates orthonormality
        pose = RigidTransform(self.rotation, self.position)
        object.__setattr__(self, "position", pose.translation)
        object.__setattr__(self, "rotation", pose.rotation)

    @classmethod
    def from_pose(cls, pose: RigidTransform) -> ScanWaypoint:
        return cls(pose.translation, pose.rotation)

    @property
    def pose(self) -> RigidTransform:
        return RigidTransform(self.rotation, self.position)

    @property
    def probe_axis(self) -> Vec3:
        """Z_p, pointing into the tissue."""
        return self.rotation[:, 2]

    @property
    def long_axis(self) -> Vec3:
        """Y_p, along the transducer."""
        return self.rotation[:, 1]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Ordered waypoints with their nominal spacing (mm)."""

    waypoints: tuple[ScanWaypoint, ...]
    spacing: float
    validate_spacing: bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        if len(self.waypoints) < 2:
            raise InvalidArgumentError("a trajectory needs at least 2 waypoints")
        if self.spacing <= 0:
            raise InvalidArgumentError("nominal spacing must be positive")
        if self.validate_spacing:
            gaps = self.segment_lengths()
            low, high = SPACING_BOUNDS
            if np.any(gaps < low * self.spacing) or np.any(gaps > high * self.spacing):
                raise InvalidArgumentError(
                    "consecutive waypoint spacing outside the allowed range",
                    {"min_mm": float(gaps.min()), "max_mm": float(gaps.max()), "nominal_mm": self.spacing},
                )

    def __len__(self) -> int:
        return len(self.waypoints)

    def __getitem__(self, index: int) -> ScanWaypoint:
        return self.waypoints[index]

    @property
    def positions(self) -> NDArray[np.float64]:
        return np.array([w.position for w in self.waypoints])

    def poses(self) -> list[RigidTransform]:
        return [w.pose for w in self.waypoints]

    def segment_lengths(self) -> NDArray[np.float64]:
        return np.linalg.norm(np.diff(self.positions, axis=0), axis=1)

    def replace(self, start: int, waypoints: Sequence[ScanWaypoint]) -> Trajectory:
        """Copy with ``waypoints`` written over the slots from ``start`` on."""
        updated = list(self.waypoints)
        updated[start : start + len(waypoints)] = list(waypoints)
        return Trajectory(tuple(updated), self.spacing, self.validate_spacing)

    def tail(self, start: int) -> Trajectory:
        return Trajectory(self.waypoints[start:], self.spacing, self.validate_spacing)

    def transformed(self, transform: RigidTransform) -> Trajectory:
        waypoints = tuple(ScanWaypoint.from_pose(transform @ w.pose) for w in self.waypoints)
        return Trajectory(waypoints, self.spacing, self.validate_spacing)


def path_tangents(points: NDArray[np.float64]) -> NDArray[np.float64]:
    """Centered differences inside, one-sided differences at both ends."""
    tangents = np.empty_like(points)
    tangents[1:-1] = points[2:] - points[:-2]
    tangents[0] = points[1] - points[0]
    tangents[-1] = points[-1] - points[-2]
    return tangents


def orient_waypoints(
    key_points: ArrayLike,
    surface: PointCloud,
    spacing: float | None = None,
) -> Trajectory:
    """Orient the probe at each key point.

    Z_p is the inward surface normal of the nearest surface point, Y_p is
    normal x tangent (so it is orthogonal to the path) and X_p completes the frame.
    """
    key_points = np.asarray(key_points, dtype=np.float64)
    if key_points.ndim != 2 or len(key_points) < 2:
        raise InvalidArgumentError("orientation needs at least 2 key points")
    if not surface.has_normals:
        raise InvalidArgumentError("surface cloud must carry normals")

    tangents = path_tangents(key_points)
    waypoints = []
    for i, (point, tangent) in enumerate(zip(key_points, tangents)):
        normal = surface.normals[knn_search(surface, point, 1)[0]]
        long_axis = np.cross(normal, tangent)
        length = np.linalg.norm(long_axis)
        if length <= 1e-9 * max(np.linalg.norm(tangent), 1e-12):
            raise DegenerateFrameError(
                f"surface normal parallel to the path at waypoint {i}", {"waypoint": i}
            )
        y_axis = long_axis / length
        z_axis = -normal
        x_axis = np.cross(y_axis, z_axis)
        rotation = np.column_stack([x_axis, y_axis, z_axis])
        if float(z_axis @ normal) > NORMAL_ALIGNMENT:
            raise DegenerateFrameError(f"probe axis not aligned with the normal at waypoint {i}", {"waypoint": i})
        waypoints.append(ScanWaypoint(point, rotation))

    if spacing is None:
        spacing = float(np.median(np.linalg.norm(np.diff(key_points, axis=0), axis=1)))
    trajectory = Trajectory(tuple(waypoints), spacing)
    logger.info(f"Trajectory with {len(trajectory)} waypoints, nominal spacing {spacing:.2f} mm")
    return trajectory


@overload
def transfer_trajectory(item: Trajectory, ct_to_camera: RigidTransform, camera_to_base: RigidTransform) -> Trajectory: ...


@overload
def transfer_trajectory(item: PointCloud, ct_to_camera: RigidTransform, camera_to_base: RigidTransform) -> PointCloud: ...


def transfer_trajectory(item, ct_to_camera, camera_to_base):
    """Map a CT-frame trajectory (or artery cloud) into the robot base frame through the camera registration and the hand-eye transform."""
    return item.transformed(camera_to_base @ ct_to_camera)


def write_trajectory_csv(path: str | Path, trajectory: Trajectory) -> Path:
    """CSV rows: index, position xyz (mm), quaternion xyzw."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [
        np.concatenate([[i], w.position, w.pose.as_quaternion()]) for i, w in enumerate(trajectory.waypoints)
    ]
    np.savetxt(path, np.array(rows), delimiter=",", header=TRAJECTORY_HEADER, comments="", fmt=["%d"] + ["%.17g"] * 7)
    return path


def read_trajectory_csv(path: str | Path, spacing: float | None = None) -> Trajectory:
    path = Path(path)
    if not path.is_file():
        raise InvalidArgumentError(f"trajectory file {path} not found")
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    waypoints = tuple(
        ScanWaypoint.from_pose(RigidTransform.from_quaternion(row[4:8], row[1:4])) for row in table
    )
    if spacing is None:
        positions = table[:, 1:4]
        spacing = float(np.median(np.linalg.norm(np.diff(positions, axis=0), axis=1)))
    return Trajectory(waypoints, spacing)


def waypoint_offsets(trajectory: Trajectory, start: int, count: int) -> NDArray[np.float64]:
    """Arc lengths d_j from waypoint ``start`` to ``start + j`` for j = 1..count."""
    positions = trajectory.positions[start : start + count + 1]
    return np.cumsum(np.linalg.norm(np.diff(positions, axis=0), axis=1))
