"""Multiscale normal-angle histogram descriptors (FPFH-style, 33 bins)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from app.services.geom import PointCloud
from app.utils.constants import (
    BASE_RADIUS_FACTOR,
    DESCRIPTOR_BINS,
    FEATURE_SCALES,
    PERSISTENCE_SIGMA,
)
from app.utils.errors import InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("registration.descriptors")

HISTOGRAM_SIZE = 3 * DESCRIPTOR_BINS
# Distinctiveness must also exceed this fraction of the mean descriptor norm,
# otherwise uniform surfaces would always flag their sampling noise.
MIN_RELATIVE_DISTINCTIVENESS = 0.05


@dataclass(frozen=True)
class FeatureDescriptor:
    """Descriptor of one point across all configured scales."""

    index: int
    histograms: NDArray[np.float64]  # (n_scales, 33)


@dataclass(frozen=True)
class MultiscaleDescriptors:
    """Per-point descriptors at every scale plus the persistence flags."""

    scales: tuple[float, ...]
    base_radius: float
    histograms: NDArray[np.float64]  # (n_scales, N, 33)
    distinctive: NDArray[np.bool_]  # (n_scales, N)

    @property
    def persistent(self) -> NDArray[np.bool_]:
        """Points distinctive at every scale."""
        return np.all(self.distinctive, axis=0)

    @property
    def persistent_indices(self) -> NDArray[np.int64]:
        return np.flatnonzero(self.persistent)

    def features(self) -> NDArray[np.float64]:
        """All scales concatenated per point, shape (N, n_scales * 33)."""
        return np.concatenate(list(self.histograms), axis=1)

    def descriptor(self, index: int) -> FeatureDescriptor:
        return FeatureDescriptor(index=index, histograms=self.histograms[:, index, :])

    def __len__(self) -> int:
        return self.histograms.shape[1]


def _neighbour_pairs(cloud: PointCloud, radius: float) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    neighbours = cloud.tree.query_ball_point(cloud.points, radius)
    counts = np.fromiter((len(n) for n in neighbours), dtype=np.int64, count=len(cloud))
    src = np.repeat(np.arange(len(cloud)), counts)
    dst = np.concatenate([np.asarray(n, dtype=np.int64) for n in neighbours]) if counts.sum() else np.zeros(0, np.int64)
    keep = src != dst
    return src[keep], dst[keep]


def _block_normalize(histograms: NDArray[np.float64]) -> NDArray[np.float64]:
    blocks = histograms.reshape(len(histograms), 3, DESCRIPTOR_BINS)
    sums = blocks.sum(axis=2, keepdims=True)
    blocks = np.divide(blocks * 100.0, sums, out=np.zeros_like(blocks), where=sums > 0)
    return blocks.reshape(len(histograms), HISTOGRAM_SIZE)


def _bin(values: NDArray[np.float64], low: float, high: float) -> NDArray[np.int64]:
    bins = np.floor((values - low) / (high - low) * DESCRIPTOR_BINS).astype(np.int64)
    return np.clip(bins, 0, DESCRIPTOR_BINS - 1)


def point_feature_histograms(cloud: PointCloud, radius: float) -> NDArray[np.float64]:
    """FPFH histograms at one support radius, shape (N, 33)."""
    src, dst = _neighbour_pairs(cloud, radius)
    n = len(cloud)
    points, normals = cloud.points, cloud.normals

    d = points[dst] - points[src]
    dist = np.linalg.norm(d, axis=1)
    u = normals[src]
    v = np.cross(d, u)
    v_norm = np.linalg.norm(v, axis=1)
    valid = (dist > 0) & (v_norm > 1e-12 * np.maximum(dist, 1.0))
    src, dst, d, dist, u, v, v_norm = src[valid], dst[valid], d[valid], dist[valid], u[valid], v[valid], v_norm[valid]
    v = v / v_norm[:, None]
    w = np.cross(u, v)
    n_t = normals[dst]

    alpha = np.einsum("ij,ij->i", v, n_t)
    phi = np.einsum("ij,ij->i", u, d) / dist
    theta = np.arctan2(np.einsum("ij,ij->i", w, n_t), np.einsum("ij,ij->i", u, n_t))

    spfh = np.zeros((n, HISTOGRAM_SIZE))
    np.add.at(spfh, (src, _bin(alpha, -1.0, 1.0)), 1.0)
    np.add.at(spfh, (src, DESCRIPTOR_BINS + _bin(phi, -1.0, 1.0)), 1.0)
    np.add.at(spfh, (src, 2 * DESCRIPTOR_BINS + _bin(theta, -np.pi, np.pi)), 1.0)
    spfh = _block_normalize(spfh)

    # FPFH: own SPFH plus distance-weighted mean of the neighbours' SPFH
    weights = 1.0 / dist
    weighted = np.zeros((n, HISTOGRAM_SIZE))
    np.add.at(weighted, src, spfh[dst] * weights[:, None])
    weight_sums = np.bincount(src, weights=weights, minlength=n)
    neighbour_mean = np.divide(weighted, weight_sums[:, None], out=np.zeros_like(weighted), where=weight_sums[:, None] > 0)
    return _block_normalize(spfh + neighbour_mean)


def multiscale_descriptors(
    cloud: PointCloud,
    scales: Sequence[float] = FEATURE_SCALES,
    base_radius: float | None = None,
    sigma: float = PERSISTENCE_SIGMA,
) -> MultiscaleDescriptors:
    """Descriptors at each scale (scale x base radius) with persistence analysis.

    A point is distinctive at a scale when its descriptor is farther from the
    cloud-mean descriptor than mean + sigma * std of those distances.
    """
    if not cloud.has_normals:
        raise InvalidArgumentError("multiscale descriptors need a cloud with normals")
    if not scales or any(s <= 0 for s in scales):
        raise InvalidArgumentError("scales must be a non-empty list of positive multipliers")
    if len(cloud) < 3:
        raise InvalidArgumentError("descriptors need at least three points")

    if base_radius is None:
        base_radius = BASE_RADIUS_FACTOR * cloud.median_spacing

    histograms = []
    distinctive = []
    for scale in scales:
        hist = point_feature_histograms(cloud, scale * base_radius)
        mean_descriptor = hist.mean(axis=0)
        distances = np.linalg.norm(hist - mean_descriptor, axis=1)
        threshold = max(
            distances.mean() + sigma * distances.std(),
            MIN_RELATIVE_DISTINCTIVENESS * np.linalg.norm(mean_descriptor),
        )
        histograms.append(hist)
        distinctive.append(distances > threshold)

    result = MultiscaleDescriptors(
        scales=tuple(float(s) for s in scales),
        base_radius=float(base_radius),
        histograms=np.stack(histograms),
        distinctive=np.stack(distinctive),
    )
    logger.debug(
        f"Descriptors for {len(cloud)} points at scales {result.scales}: "
        f"{len(result.persistent_indices)} persistent (base radius {base_radius:.2f} mm)"
    )
    return result
