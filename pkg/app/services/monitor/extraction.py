"""Segmented RGB-D frame to a base-frame surface point cloud."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike

from app.services.geom import PointCloud
from app.services.monitor.camera import CameraModel
from app.services.monitor.mask import Mask
from app.services.monitor.plane import fit_plane
from app.utils.errors import EmptyCloudError, InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("monitor.extraction")


def mask_to_cloud(
    mask: Mask,
    depth_m: ArrayLike,
    camera: CameraModel,
    plane_tolerance_mm: float = 10.0,
    z_cut_mm: float | None = None,
    min_inlier_fraction: float = 0.3,
    iterations: int = 200,
    seed: int = 0,
    margin_px: int = 8,
) -> PointCloud:
    """Back-project the padded mask box, drop the table plane and cut above ``z_cut_mm``.

    ``depth_m`` is in metres with 0 marking invalid pixels. The table plane is
    fitted on the valid pixels outside the mask; points within
    ``plane_tolerance_mm`` of it, or on its far side, are removed.
    """
    depth = np.asarray(depth_m, dtype=np.float64)
    if depth.shape != mask.shape:
        raise InvalidArgumentError(f"depth shape {depth.shape} does not match mask shape {mask.shape}")
    if depth.shape != camera.shape:
        raise InvalidArgumentError(f"frame shape {depth.shape} does not match the camera {camera.shape}")

    box = mask.bounding_box()
    if box is None:
        raise EmptyCloudError("the limb mask is empty")
    r0, r1, c0, c1 = box
    r0, c0 = max(r0 - margin_px, 0), max(c0 - margin_px, 0)
    r1, c1 = min(r1 + margin_px, depth.shape[0] - 1), min(c1 + margin_px, depth.shape[1] - 1)

    window = depth[r0 : r1 + 1, c0 : c1 + 1]
    rows, cols = np.nonzero((window > 0) & np.isfinite(window))
    if len(rows) == 0:
        raise EmptyCloudError("no valid depth inside the mask box")
    rows += r0
    cols += c0
    on_mask = mask.values[rows, cols]

    camera_points = camera.back_project(cols, rows, depth[rows, cols] * 1000.0)
    points = camera.pose.apply(camera_points)

    background = points[~on_mask] if np.count_nonzero(~on_mask) >= 3 else points
    plane = fit_plane(background, plane_tolerance_mm, iterations, min_inlier_fraction, seed)
    keep = np.ones(len(points), dtype=bool)
    if plane is None:
        logger.warning("table plane not found; keeping every back-projected point")
    else:
        plane = plane.oriented_towards(camera.center)
        keep &= plane.signed_distance(points) > plane_tolerance_mm
    if z_cut_mm is not None:
        keep &= points[:, 2] <= z_cut_mm

    if not keep.any():
        raise EmptyCloudError("no points left after plane removal")
    logger.debug(f"mask_to_cloud kept {int(keep.sum())} of {len(points)} points")
    return PointCloud(points[keep])
