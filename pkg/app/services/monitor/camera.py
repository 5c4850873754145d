"""Pinhole RGB-D camera model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.schemas.calibration import CameraSpec
from app.services.geom import RigidTransform, Vec3, transform_from_spec
from app.utils.errors import InvalidArgumentError


@dataclass(frozen=True)
class CameraModel:
    """Intrinsics in px and the pose in the base frame; the optical axis is +Z of the camera frame."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    pose: RigidTransform

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidArgumentError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise InvalidArgumentError("camera resolution must be at least 1 px")

    @classmethod
    def from_spec(cls, spec: CameraSpec, pose: RigidTransform | None = None) -> CameraModel:
        return cls(
            fx=spec.fx,
            fy=spec.fy,
            cx=spec.cx,
            cy=spec.cy,
            width=spec.width,
            height=spec.height,
            pose=pose if pose is not None else transform_from_spec(spec.pose),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    @property
    def center(self) -> Vec3:
        """Optical center in the base frame."""
        return self.pose.translation

    def with_pose(self, pose: RigidTransform) -> CameraModel:
        return CameraModel(self.fx, self.fy, self.cx, self.cy, self.width, self.height, pose)

    def project(self, points: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
        """Pixel coordinates (u, v) and depth (mm along the optical axis) of base-frame points."""
        camera_points = self.pose.inverse().apply(np.atleast_2d(np.asarray(points, dtype=np.float64)))
        depth = camera_points[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * camera_points[:, 0] / depth + self.cx
            v = self.fy * camera_points[:, 1] / depth + self.cy
        return u, v, depth

    def back_project(self, u: ArrayLike, v: ArrayLike, depth_mm: ArrayLike) -> NDArray[np.float64]:
        """Camera-frame points (mm) of pixels with known depth."""
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        z = np.asarray(depth_mm, dtype=np.float64)
        return np.column_stack([(u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z])

    def pixel_rays(self) -> NDArray[np.float64]:
        """Base-frame unit ray directions of every pixel, shape (H, W, 3)."""
        v, u = np.mgrid[0 : self.height, 0 : self.width].astype(np.float64)
        directions = np.stack([(u - self.cx) / self.fx, (v - self.cy) / self.fy, np.ones_like(u)], axis=-1)
        directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
        return directions @ self.pose.rotation.T
