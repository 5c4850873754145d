"""Poisson disc resampling of point sets."""

import numpy as np

from app.services.geom.cloud import PointCloud
from app.utils.errors import InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("geom.sampling")


class PoissonDiscSampler:
    """Greedy dart throwing over a seeded permutation of the input points.

    Every accepted point blocks all input points closer than ``radius``; the
    result is a maximal subset with pairwise distances >= radius.
    """

    def __init__(self, cloud: PointCloud, seed: int = 0):
        self.cloud = cloud
        self.seed = seed

    def sample_indices(self, radius: float) -> np.ndarray:
        if radius <= 0:
            raise InvalidArgumentError(f"radius must be positive, got {radius}")
        if self.cloud.is_empty:
            return np.zeros(0, dtype=np.int64)

        points = self.cloud.points
        order = np.random.default_rng(self.seed).permutation(len(points))
        blocked = np.zeros(len(points), dtype=bool)
        accepted: list[int] = []

        for index in order:
            if blocked[index]:
                continue
            accepted.append(int(index))
            neighbours = np.asarray(self.cloud.tree.query_ball_point(points[index], radius), dtype=np.int64)
            if len(neighbours):
                distances = np.linalg.norm(points[neighbours] - points[index], axis=1)
                blocked[neighbours[distances < radius]] = True
            blocked[index] = True

        return np.sort(np.asarray(accepted, dtype=np.int64))

    def sample(self, radius: float) -> PointCloud:
        return self.cloud.subset(self.sample_indices(radius))

    def sample_count(self, target_count: int, iterations: int = 30, rel_tolerance: float = 0.005) -> PointCloud:
        """Bisect on the radius until the sample size is as close as possible to ``target_count``."""
        if target_count < 1:
            raise InvalidArgumentError("target count must be positive")
        if target_count >= len(self.cloud):
            return self.cloud

        low = self.cloud.median_spacing * 0.5
        high = max(self.cloud.diameter, low * 2.0)
        best = self.sample_indices(high)
        for _ in range(iterations):
            radius = 0.5 * (low + high)
            indices = self.sample_indices(radius)
            if abs(len(indices) - target_count) < abs(len(best) - target_count):
                best = indices
            if abs(len(indices) - target_count) <= rel_tolerance * target_count:
                break
            if len(indices) > target_count:
                low = radius
            else:
                high = radius

        logger.debug(f"Poisson disc resampling: {len(self.cloud)} -> {len(best)} points (target {target_count})")
        return self.cloud.subset(best)


def poisson_disc_sample(cloud: PointCloud, radius: float, seed: int = 0) -> PointCloud:
    """Maximal subset of ``cloud`` with minimum pairwise distance ``radius``."""
    return PoissonDiscSampler(cloud, seed).sample(radius)


def poisson_disc_sample_count(cloud: PointCloud, target_count: int, seed: int = 0) -> PointCloud:
    """Poisson disc subset sized as close as possible to ``target_count``."""
    return PoissonDiscSampler(cloud, seed).sample_count(target_count)
