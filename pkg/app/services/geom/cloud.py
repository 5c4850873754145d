"""Point clouds and the geometric primitives built on them."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree

from app.services.geom.transform import RigidTransform, Vec3, as_vec3
from app.utils.constants import NORMAL_NEIGHBOURS, UNIT_NORMAL_TOLERANCE
from app.utils.errors import DegenerateInputError, InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("geom")


def _frozen_points(values: ArrayLike, name: str) -> NDArray[np.float64]:
    array = np.array(values, dtype=np.float64, copy=True)
    if array.size == 0:
        array = array.reshape(0, 3)
    if array.ndim != 2 or array.shape[1] != 3:
        raise InvalidArgumentError(f"{name} must have shape (N, 3), got {array.shape}")
    if not np.all(np.isfinite(array)):
        raise InvalidArgumentError(f"{name} must be finite")
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered 3D points (mm) with optional unit normals."""

    points: NDArray[np.float64]
    normals: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", _frozen_points(self.points, "points"))
        if self.normals is not None:
            normals = _frozen_points(self.normals, "normals")
            if len(normals) != len(self.points):
                raise InvalidArgumentError("normals must match the number of points")
            lengths = np.linalg.norm(normals, axis=1)
            if len(lengths) and np.max(np.abs(lengths - 1.0)) > UNIT_NORMAL_TOLERANCE:
                raise InvalidArgumentError("normals must have unit length")
            object.__setattr__(self, "normals", normals)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def is_empty(self) -> bool:
        return len(self.points) == 0

    @property
    def has_normals(self) -> bool:
        return self.normals is not None

    @cached_property
    def tree(self) -> cKDTree:
        if self.is_empty:
            raise InvalidArgumentError("cannot index an empty cloud")
        return cKDTree(self.points)

    @cached_property
    def median_spacing(self) -> float:
        """Median distance from each point to its nearest neighbour."""
        if len(self) < 2:
            raise InvalidArgumentError("spacing needs at least two points")
        distances, _ = self.tree.query(self.points, k=2)
        return float(np.median(distances[:, 1]))

    @property
    def centroid(self) -> Vec3:
        return self.points.mean(axis=0)

    @property
    def diameter(self) -> float:
        """Bounding-box diagonal length."""
        if self.is_empty:
            return 0.0
        return float(np.linalg.norm(self.points.max(axis=0) - self.points.min(axis=0)))

    def transformed(self, transform: RigidTransform) -> PointCloud:
        normals = None if self.normals is None else transform.rotate(self.normals)
        return PointCloud(transform.apply(self.points), normals)

    def subset(self, indices: ArrayLike) -> PointCloud:
        indices = np.asarray(indices)
        normals = None if self.normals is None else self.normals[indices]
        return PointCloud(self.points[indices], normals)

    def with_normals(self, normals: ArrayLike) -> PointCloud:
        return PointCloud(self.points, normals)

    def without_normals(self) -> PointCloud:
        return PointCloud(self.points)


@dataclass(frozen=True)
class PrincipalAxes:
    """Principal directions ordered by descending eigenvalue (mm²)."""

    axes: NDArray[np.float64]  # rows are axes
    eigenvalues: NDArray[np.float64]
    mean: Vec3

    @property
    def first(self) -> Vec3:
        return self.axes[0]

    def as_rotation(self) -> NDArray[np.float64]:
        """Matrix whose columns are the axes (right-handed)."""
        return self.axes.T


@dataclass(frozen=True)
class NormalEstimation:
    """Per-point normals with a flag for degenerate neighbourhoods."""

    cloud: PointCloud
    normals: NDArray[np.float64]  # NaN rows where degenerate
    degenerate: NDArray[np.bool_]

    def to_cloud(self) -> PointCloud:
        """Points with valid normals (degenerate points omitted)."""
        valid = ~self.degenerate
        return PointCloud(self.cloud.points[valid], self.normals[valid])


def knn_search(cloud: PointCloud, query: ArrayLike, k: int) -> list[int]:
    """Indices of the k nearest points, ascending by distance, ties by lower index.

    The k-d tree only proposes candidates; the ordering is decided on exact
    squared distances so the result matches an exhaustive sort.
    """
    if cloud.is_empty:
        raise InvalidArgumentError("knn search on an empty cloud")
    if k < 1 or k > len(cloud):
        raise InvalidArgumentError(f"k must be in [1, {len(cloud)}], got {k}")

    query = as_vec3(query)
    distances, _ = cloud.tree.query(query, k=k)
    radius = float(np.atleast_1d(distances)[-1])
    candidates = np.asarray(cloud.tree.query_ball_point(query, radius * (1.0 + 1e-9) + 1e-12))
    if len(candidates) < k:
        candidates = np.arange(len(cloud))

    squared = np.sum((cloud.points[candidates] - query) ** 2, axis=1)
    order = np.lexsort((candidates, squared))
    return [int(i) for i in candidates[order[:k]]]


def estimate_normals(
    cloud: PointCloud,
    k: int = NORMAL_NEIGHBOURS,
    viewpoint: ArrayLike | None = None,
) -> NormalEstimation:
    """Normals from the smallest eigenvector of each k-neighbourhood covariance.

    Normals are flipped so that normal · (viewpoint - point) >= 0. Without a
    viewpoint the template convention applies: a point high above the cloud
    on +Z.
    """
    if k < 3 or len(cloud) < k:
        raise InvalidArgumentError(f"normal estimation needs |cloud| >= k >= 3 (|cloud|={len(cloud)}, k={k})")

    if viewpoint is None:
        viewpoint = cloud.centroid + np.array([0.0, 0.0, 1e6])
    viewpoint = as_vec3(viewpoint)

    _, neighbours = cloud.tree.query(cloud.points, k=k)
    patches = cloud.points[neighbours]
    centered = patches - patches.mean(axis=1, keepdims=True)
    covariance = np.einsum("nki,nkj->nij", centered, centered) / k
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)

    normals = eigenvectors[:, :, 0]
    scale = np.maximum(eigenvalues[:, 2], np.finfo(np.float64).tiny)
    # collinear (or coincident) neighbourhoods have a second eigenvalue of ~0
    degenerate = eigenvalues[:, 1] <= 1e-10 * scale

    flip = np.einsum("ni,ni->n", normals, viewpoint - cloud.points) < 0
    normals = np.where(flip[:, None], -normals, normals)
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    normals[degenerate] = np.nan

    if degenerate.any():
        logger.warning(f"{int(degenerate.sum())} of {len(cloud)} points have degenerate neighbourhoods")

    return NormalEstimation(cloud=cloud, normals=normals, degenerate=degenerate)


def principal_axes(cloud: PointCloud) -> PrincipalAxes:
    """PCA of the centered points; axes form a right-handed frame."""
    if len(cloud) < 2:
        raise InvalidArgumentError("principal axes need at least two points")

    mean = cloud.centroid
    centered = cloud.points - mean
    covariance = centered.T @ centered / len(cloud)
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    if eigenvalues[-1] <= 1e-18:
        raise DegenerateInputError("all points are identical")

    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    axes = eigenvectors[:, order].T.copy()
    # deterministic sign: largest component of each of the first two axes positive
    for i in range(2):
        if axes[i, np.argmax(np.abs(axes[i]))] < 0:
            axes[i] = -axes[i]
    axes[2] = np.cross(axes[0], axes[1])

    return PrincipalAxes(axes=axes, eigenvalues=eigenvalues, mean=mean)


def squared_distances(a: PointCloud, b: PointCloud, correspondence: ArrayLike) -> NDArray[np.float64]:
    correspondence = np.asarray(correspondence, dtype=np.int64)
    if correspondence.size == 0:
        raise InvalidArgumentError("empty correspondence")
    if len(correspondence) != len(a):
        raise InvalidArgumentError("correspondence must map every index of the first cloud")
    if correspondence.min() < 0 or correspondence.max() >= len(b):
        raise InvalidArgumentError("correspondence index out of range")
    return np.sum((a.points - b.points[correspondence]) ** 2, axis=1)


def cloud_mse(a: PointCloud, b: PointCloud, correspondence: ArrayLike) -> float:
    """Root of the mean squared corresponding-point distance, in mm."""
    return float(np.sqrt(np.mean(squared_distances(a, b, correspondence))))


def crop_along_principal_axis(
    cloud: PointCloud,
    lower_fraction: float = 0.0,
    upper_fraction: float = 1.0,
) -> PointCloud:
    """Keep the points whose projection on the first principal axis lies in the
    [lower, upper] fraction of its extent (planes orthogonal to that axis)."""
    if not 0.0 <= lower_fraction < upper_fraction <= 1.0:
        raise InvalidArgumentError("crop fractions must satisfy 0 <= lower < upper <= 1")
    axes = principal_axes(cloud)
    projection = (cloud.points - axes.mean) @ axes.first
    low, high = projection.min(), projection.max()
    span = high - low
    keep = (projection >= low + lower_fraction * span) & (projection <= low + upper_fraction * span)
    return cloud.subset(np.flatnonzero(keep))
