"""RANSAC plane fitting for table removal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.services.geom import Vec3, as_vec3
from app.utils.errors import InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("monitor.plane")


@dataclass(frozen=True)
class Plane:
    """normal · x + offset = 0 with a unit normal."""

    normal: Vec3
    offset: float
    inlier_fraction: float = 1.0

    def signed_distance(self, points: ArrayLike) -> NDArray[np.float64]:
        return np.atleast_2d(np.asarray(points, dtype=np.float64)) @ self.normal + self.offset

    def oriented_towards(self, point: ArrayLike) -> Plane:
        """Same plane with the normal flipped so that ``point`` lies on the positive side."""
        if float(self.signed_distance(point)[0]) >= 0:
            return self
        return Plane(-self.normal, -self.offset, self.inlier_fraction)


def plane_through(points: ArrayLike) -> Plane:
    """Least-squares plane: the smallest singular direction of the centered points."""
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 3:
        raise InvalidArgumentError("a plane needs at least three points")
    mean = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - mean, full_matrices=False)
    normal = as_vec3(vt[-1])
    return Plane(normal, -float(normal @ mean))


def fit_plane(
    points: ArrayLike,
    tolerance_mm: float = 10.0,
    iterations: int = 200,
    min_inlier_fraction: float = 0.3,
    seed: int = 0,
) -> Plane | None:
    """Dominant plane by RANSAC over random 3-point samples, refit on its inliers.

    Returns None when no sampled plane reaches ``min_inlier_fraction``.
    """
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 3:
        return None

    rng = np.random.default_rng(seed)
    best_count = 0
    best_inliers: NDArray[np.bool_] | None = None
    for _ in range(iterations):
        sample = points[rng.choice(len(points), 3, replace=False)]
        normal = np.cross(sample[1] - sample[0], sample[2] - sample[0])
        length = np.linalg.norm(normal)
        if length < 1e-9:
            continue
        normal /= length
        inliers = np.abs((points - sample[0]) @ normal) < tolerance_mm
        count = int(inliers.sum())
        if count > best_count:
            best_count, best_inliers = count, inliers

    if best_inliers is None or best_count < min_inlier_fraction * len(points):
        logger.warning(f"RANSAC plane fit failed: best inlier fraction {best_count / len(points):.2f}")
        return None

    refit = plane_through(points[best_inliers])
    fraction = float(np.mean(np.abs(refit.signed_distance(points)) < tolerance_mm))
    return Plane(refit.normal, refit.offset, fraction)
