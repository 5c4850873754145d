"""Vessel centerline extraction and projection onto the arm surface."""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from app.services.geom import PointCloud, knn_search, principal_axes
from app.utils.constants import CENTERLINE_INTERVAL_MM, SURFACE_NEIGHBOURS
from app.utils.errors import DegenerateInputError, InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("planner.centerline")

MIN_ARTERY_POINTS = 10


def extract_centerline(artery_cloud: PointCloud, interval_mm: float = CENTERLINE_INTERVAL_MM) -> NDArray[np.float64]:
    """Bin the artery points along their first principal axis and average each bin.

    Returns the (M, 3) bin means ordered along the axis; empty bins are skipped.
    """
    if len(artery_cloud) < MIN_ARTERY_POINTS:
        raise InvalidArgumentError(f"artery cloud needs at least {MIN_ARTERY_POINTS} points")
    if interval_mm <= 0:
        raise InvalidArgumentError("centerline interval must be positive")

    axes = principal_axes(artery_cloud)
    projection = (artery_cloud.points - axes.mean) @ axes.first
    low, high = float(projection.min()), float(projection.max())
    n_bins = max(int(np.ceil((high - low) / interval_mm)), 1)
    bins = np.clip(np.floor((projection - low) / interval_mm).astype(np.int64), 0, n_bins - 1)

    counts = np.bincount(bins, minlength=n_bins)
    sums = np.zeros((n_bins, 3))
    np.add.at(sums, bins, artery_cloud.points)
    occupied = counts > 0
    if occupied.sum() < 2:
        raise DegenerateInputError(
            "all artery points fall into one bin, a trajectory needs two centers",
            {"extent_mm": high - low, "interval_mm": interval_mm},
        )

    centers = sums[occupied] / counts[occupied, None]
    logger.debug(f"Centerline: {len(centers)} centers from {n_bins} bins of {interval_mm} mm")
    return centers


def project_centerline_to_surface(
    centers: NDArray[np.float64],
    surface: PointCloud,
    k: int = SURFACE_NEIGHBOURS,
) -> NDArray[np.float64]:
    """Lift each center to the top of the surface and average its k nearest surface points.

    The lift is along Z (the table is level), so centers keep their x, y.
    """
    if surface.is_empty:
        raise InvalidArgumentError("surface cloud is empty")
    if k < 1 or k > len(surface):
        raise InvalidArgumentError(f"neighbour count must be in [1, {len(surface)}], got {k}")

    z_max = float(surface.points[:, 2].max())
    key_points = np.empty((len(centers), 3))
    for i, center in enumerate(np.asarray(centers, dtype=np.float64)):
        lifted = np.array([center[0], center[1], z_max])
        key_points[i] = surface.points[knn_search(surface, lifted, k)].mean(axis=0)
    return key_points
