"""Feature-based coarse alignment from persistent multiscale descriptors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, Field
from scipy.spatial import cKDTree

from app.services.geom import PointCloud, RigidTransform, best_fit_transform
from app.services.registration.descriptors import multiscale_descriptors
from app.utils.constants import (
    BASE_RADIUS_FACTOR,
    CORRESPONDENCE_CONSISTENCY,
    FEATURE_SCALES,
    PERSISTENCE_SIGMA,
)
from app.utils.errors import CoarseAlignmentError, InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("registration.coarse")

MIN_CLOUD_POINTS = 50


class CoarseParams(BaseModel):
    """Settings for the feature-based initial alignment."""

    scales: tuple[float, ...] = FEATURE_SCALES
    consistency_threshold: float = Field(
        default=CORRESPONDENCE_CONSISTENCY, gt=0, description="fraction of the target diameter"
    )
    persistence_sigma: float = Field(default=PERSISTENCE_SIGMA, ge=0)
    min_persistent: int = Field(default=10, ge=3)
    edge_length_ratio: float = Field(default=0.9, gt=0, le=1)
    ransac_iterations: int = Field(default=1000, gt=0)
    seed: int = 0

    model_config = {"frozen": True}


@dataclass(frozen=True)
class Correspondence:
    source_index: int
    target_index: int
    distance: float  # descriptor distance, unitless


def _match(
    source_features: NDArray[np.float64],
    target_features: NDArray[np.float64],
    source_candidates: NDArray[np.int64],
    target_candidates: NDArray[np.int64],
) -> list[Correspondence]:
    """Reciprocal nearest-descriptor matches, one-directional when too few are reciprocal."""
    target_tree = cKDTree(target_features[target_candidates])
    source_tree = cKDTree(source_features[source_candidates])

    forward_dist, forward = target_tree.query(source_features[source_candidates])
    _, backward = source_tree.query(target_features[target_candidates])

    matches = []
    one_way = []
    for i, (j, dist) in enumerate(zip(forward, forward_dist)):
        pair = Correspondence(int(source_candidates[i]), int(target_candidates[j]), float(dist))
        one_way.append(pair)
        if backward[j] == i:
            matches.append(pair)

    if len(matches) < 3:
        logger.debug(f"Only {len(matches)} reciprocal matches, using {len(one_way)} one-way matches")
        return one_way
    return matches


def _consistent_subset(
    src: NDArray[np.float64], dst: NDArray[np.float64], threshold: float
) -> NDArray[np.int64]:
    """Correspondences whose pairwise distances agree with at least half of the best-supported one."""
    d_src = np.linalg.norm(src[:, None, :] - src[None, :, :], axis=2)
    d_dst = np.linalg.norm(dst[:, None, :] - dst[None, :, :], axis=2)
    consistent = np.abs(d_src - d_dst) <= threshold
    support = consistent.sum(axis=1) - 1
    if support.max(initial=0) <= 0:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero(support >= 0.5 * support.max())


def _ransac(
    src: NDArray[np.float64],
    dst: NDArray[np.float64],
    inlier_distance: float,
    params: CoarseParams,
) -> tuple[RigidTransform, NDArray[np.bool_]]:
    rng = np.random.default_rng(params.seed)
    best_inliers = np.zeros(len(src), dtype=bool)
    best_transform = RigidTransform.identity()
    best_error = np.inf

    for _ in range(params.ransac_iterations):
        sample = rng.choice(len(src), size=3, replace=False)
        s, t = src[sample], dst[sample]
        edges_s = np.linalg.norm(s - np.roll(s, 1, axis=0), axis=1)
        edges_t = np.linalg.norm(t - np.roll(t, 1, axis=0), axis=1)
        longest = np.maximum(edges_s, edges_t)
        if np.any(longest <= 0) or np.any(np.minimum(edges_s, edges_t) < params.edge_length_ratio * longest):
            continue

        transform = best_fit_transform(s, t)
        residuals = np.linalg.norm(transform.apply(src) - dst, axis=1)
        inliers = residuals < inlier_distance
        error = float(np.mean(residuals[inliers])) if inliers.any() else np.inf
        if inliers.sum() > best_inliers.sum() or (inliers.sum() == best_inliers.sum() and error < best_error):
            best_inliers, best_transform, best_error = inliers, transform, error

    return best_transform, best_inliers


def coarse_align(
    source: PointCloud,
    target: PointCloud,
    params: CoarseParams | None = None,
) -> RigidTransform:
    """Initial transform mapping ``source`` onto ``target`` from persistent features."""
    params = params or CoarseParams()
    if not (source.has_normals and target.has_normals):
        raise InvalidArgumentError("coarse alignment needs clouds with normals")
    if len(source) < MIN_CLOUD_POINTS or len(target) < MIN_CLOUD_POINTS:
        raise InvalidArgumentError(f"coarse alignment needs at least {MIN_CLOUD_POINTS} points per cloud")

    base_radius = BASE_RADIUS_FACTOR * max(source.median_spacing, target.median_spacing)
    source_desc = multiscale_descriptors(source, params.scales, base_radius, params.persistence_sigma)
    target_desc = multiscale_descriptors(target, params.scales, base_radius, params.persistence_sigma)

    source_candidates = source_desc.persistent_indices
    target_candidates = target_desc.persistent_indices
    if len(source_candidates) < params.min_persistent or len(target_candidates) < params.min_persistent:
        logger.debug(
            f"Few persistent features ({len(source_candidates)}/{len(target_candidates)}), matching all points"
        )
        source_candidates = np.arange(len(source))
        target_candidates = np.arange(len(target))

    matches = _match(source_desc.features(), target_desc.features(), source_candidates, target_candidates)
    src = source.points[[m.source_index for m in matches]]
    dst = target.points[[m.target_index for m in matches]]

    keep = _consistent_subset(src, dst, params.consistency_threshold * target.diameter)
    if len(keep) < 3:
        raise CoarseAlignmentError(
            "fewer than 3 consistent correspondences", {"matches": len(matches), "consistent": int(len(keep))}
        )
    src, dst = src[keep], dst[keep]

    _, inliers = _ransac(src, dst, base_radius * 2.0, params)
    if inliers.sum() < 3:
        raise CoarseAlignmentError(
            "fewer than 3 correspondences survived verification",
            {"consistent": int(len(keep)), "inliers": int(inliers.sum())},
        )

    transform = best_fit_transform(src[inliers], dst[inliers])
    logger.info(
        f"Coarse alignment: {len(matches)} matches, {len(keep)} consistent, "
        f"{int(inliers.sum())} inliers, rotation {transform.rotation_angle_deg():.2f} deg"
    )
    return transform
