"""RGB-D camera rendering of the phantom: silhouette mask, depth and self-occlusion cloud."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage

from app.services.geom import PointCloud
from app.services.monitor import CameraModel, Mask
from app.services.simworld.phantom import Phantom
from app.utils.errors import EmptyViewError, InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("simworld.camera")

VISIBILITY_TOLERANCE_MM = 1.5
OCCLUDER_HEIGHT_MM = 250.0
OCCLUDER_MARGIN_PX = 12


@dataclass(frozen=True, eq=False)
class CameraView:
    """One RGB-D frame: limb mask, depth in metres (0 = invalid) and the visible surface."""

    mask: Mask
    depth_m: NDArray[np.float64]
    visible: PointCloud


def _zbuffer(
    cloud: PointCloud, camera: CameraModel
) -> tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.float64], NDArray[np.float64]]:
    """Candidate point indices, their flat pixel index and depth, and the depth buffer (inf where empty)."""
    u, v, depth = camera.project(cloud.points)
    candidate = depth > 0
    if cloud.has_normals:
        to_camera = camera.center - cloud.points
        candidate &= np.einsum("ij,ij->i", cloud.normals, to_camera) > 0
    with np.errstate(invalid="ignore"):
        col = np.rint(u)
        row = np.rint(v)
    candidate &= (col >= 0) & (col < camera.width) & (row >= 0) & (row < camera.height)
    indices = np.flatnonzero(candidate)
    flat = row[indices].astype(np.int64) * camera.width + col[indices].astype(np.int64)

    buffer = np.full(camera.height * camera.width, np.inf)
    np.minimum.at(buffer, flat, depth[indices])
    return indices, flat, depth[indices], buffer


def render_cloud_view(
    cloud: PointCloud, camera: CameraModel, tolerance_mm: float = VISIBILITY_TOLERANCE_MM
) -> PointCloud:
    """Points of ``cloud`` that face the camera and win (within tolerance) their pixel's depth test."""
    indices, flat, depth, buffer = _zbuffer(cloud, camera)
    visible = indices[depth <= buffer[flat] + tolerance_mm]
    if len(visible) == 0:
        raise EmptyViewError("no point of the cloud is visible from the camera")
    return cloud.subset(visible)


def _table_depth(camera: CameraModel) -> NDArray[np.float64]:
    """Optical-axis depth (mm) of the table plane z = 0 per pixel; 0 where the ray misses it."""
    rays = camera.pixel_rays()
    origin_z = camera.center[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        distance = -origin_z / rays[..., 2]
    hits = np.isfinite(distance) & (distance > 0)
    optical_axis = camera.pose.rotation[:, 2]
    depth = np.where(hits, distance * (rays @ optical_axis), 0.0)
    return depth


def _occluder_band(mask: NDArray[np.bool_], fraction: float, start_col: bool) -> tuple[slice, slice] | None:
    rows, cols = np.nonzero(mask)
    if len(rows) == 0 or fraction <= 0:
        return None
    c0, c1 = int(cols.min()), int(cols.max())
    width = int(round(fraction * (c1 - c0 + 1)))
    if width == 0:
        return None
    band_cols = slice(c0, c0 + width) if start_col else slice(c1 + 1 - width, c1 + 1)
    r0 = max(int(rows.min()) - OCCLUDER_MARGIN_PX, 0)
    r1 = min(int(rows.max()) + OCCLUDER_MARGIN_PX + 1, mask.shape[0])
    return slice(r0, r1), band_cols


def render_camera_view(
    phantom: Phantom,
    camera: CameraModel,
    depth_noise_mm: float = 0.0,
    occluder_fraction: float = 0.0,
    seed: int = 0,
    timestamp: float = 0.0,
) -> CameraView:
    """Z-buffered render of the phantom over the table plane.

    The optional occluder stands in for the probe and robot: a band covering
    ``occluder_fraction`` of the limb's image width at the arm's start end,
    ``OCCLUDER_HEIGHT_MM`` above the table. It hides the limb in the mask and
    in the depth image.
    """
    if not 0.0 <= occluder_fraction < 1.0:
        raise InvalidArgumentError("occluder fraction must lie in [0, 1)")

    surface = phantom.camera_surface
    indices, flat, depth, buffer = _zbuffer(surface, camera)
    hit = np.isfinite(buffer)
    if not hit.any():
        raise EmptyViewError("phantom is outside the camera frustum")

    shape = camera.shape
    silhouette = ndimage.binary_closing(hit.reshape(shape), structure=np.ones((3, 3), dtype=bool), iterations=2)
    silhouette = ndimage.binary_fill_holes(silhouette)

    limb_depth = buffer.reshape(shape)
    holes = silhouette & ~np.isfinite(limb_depth)
    while holes.any():
        # grow the surface depth into closing holes from their nearest filled neighbours
        filled = ndimage.grey_erosion(np.where(np.isfinite(limb_depth), limb_depth, np.inf), size=(3, 3))
        limb_depth = np.where(holes, filled, limb_depth)
        remaining = silhouette & ~np.isfinite(limb_depth)
        if remaining.sum() == holes.sum():
            silhouette &= np.isfinite(limb_depth)
            break
        holes = remaining

    depth_mm = np.where(silhouette, limb_depth, _table_depth(camera))
    winner = depth <= buffer[flat] + VISIBILITY_TOLERANCE_MM

    # the arm's start end is local x = -L/2
    half = phantom.geometry.half_length
    ends = phantom.pose.apply(np.array([[-half, 0.0, 0.0], [half, 0.0, 0.0]]))
    u_ends = camera.project(ends)[0]
    band = _occluder_band(silhouette, occluder_fraction, start_col=u_ends[0] <= u_ends[1])
    if band is not None and camera.center[2] > OCCLUDER_HEIGHT_MM:
        occluded = np.zeros(shape, dtype=bool)
        occluded[band] = True
        silhouette = silhouette & ~occluded
        height_ratio = (camera.center[2] - OCCLUDER_HEIGHT_MM) / camera.center[2]
        depth_mm[occluded] = _table_depth(camera)[occluded] * height_ratio
        winner &= ~occluded.ravel()[flat]
    visible = indices[winner]

    if depth_noise_mm > 0:
        rng = np.random.default_rng(seed)
        depth_mm = depth_mm + rng.normal(0.0, depth_noise_mm, shape) * (depth_mm > 0)
    depth_m = np.clip(depth_mm, 0.0, None) / 1000.0

    if len(visible) == 0:
        raise EmptyViewError("no phantom surface is visible")
    logger.debug(f"Camera render: {int(silhouette.sum())} mask px, {len(visible)} visible points")
    return CameraView(Mask(silhouette, timestamp), depth_m, surface.subset(visible))
