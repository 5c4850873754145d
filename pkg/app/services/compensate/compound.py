"""Compounding tracked vessel segmentations into a 3D point set."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import ndimage
from scipy.spatial import cKDTree

from app.services.compensate.sweep import SweepFrame, SweepRecord
from app.services.geom import PointCloud, write_ply
from app.services.planner import CalibrationSet
from app.utils.errors import InvalidArgumentError, UndefinedGapError
from app.utils.logger import get_logger

logger = get_logger("compensate.compound")

CompoundMode = Literal["centroid", "contour"]


@dataclass(frozen=True, eq=False)
class CompoundVolume:
    """Base-frame vessel points tagged with their sweep and frame."""

    cloud: PointCloud
    sweep_ids: NDArray[np.int64]
    frame_ids: NDArray[np.int64]

    def __post_init__(self) -> None:
        if not (len(self.cloud) == len(self.sweep_ids) == len(self.frame_ids)):
            raise InvalidArgumentError("one sweep id and frame id per point")

    def __len__(self) -> int:
        return len(self.cloud)

    @property
    def points(self) -> NDArray[np.float64]:
        return self.cloud.points

    def frame_points(self, sweep_id: int, frame: int) -> NDArray[np.float64]:
        return self.points[(self.sweep_ids == sweep_id) & (self.frame_ids == frame)]

    def save(self, path: str | Path) -> Path:
        return write_ply(path, self.cloud, {"sweep": self.sweep_ids, "frame": self.frame_ids})


def _frame_pixels(frame: SweepFrame, mode: CompoundMode) -> NDArray[np.float64]:
    if mode == "centroid" or frame.vessel_mask is None:
        return np.zeros((0, 2)) if frame.centroid is None else np.array([frame.centroid], dtype=np.float64)
    mask = frame.vessel_mask.values
    contour = mask & ~ndimage.binary_erosion(mask)
    rows, cols = np.nonzero(contour)
    return np.column_stack([cols, rows]).astype(np.float64)


def compound_sweeps(
    sweeps: Sequence[SweepRecord], calib: CalibrationSet, mode: CompoundMode = "centroid"
) -> CompoundVolume:
    """Map each frame's vessel centroid (or mask contour) through its pose into the base frame."""
    if mode not in ("centroid", "contour"):
        raise InvalidArgumentError(f"unknown compounding mode {mode!r}")
    points, sweep_ids, frame_ids = [], [], []
    for sweep in sweeps:
        for frame in sweep.frames:
            pixels = _frame_pixels(frame, mode)
            if len(pixels) == 0:
                continue
            points.append(calib.pixels_to_base(pixels, frame.pose))
            sweep_ids.append(np.full(len(pixels), sweep.sweep_id, dtype=np.int64))
            frame_ids.append(np.full(len(pixels), frame.frame, dtype=np.int64))

    if not points:
        logger.warning("No vessel pixels in any sweep; the compound volume is empty")
        return CompoundVolume(PointCloud(np.zeros((0, 3))), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
    volume = CompoundVolume(PointCloud(np.vstack(points)), np.concatenate(sweep_ids), np.concatenate(frame_ids))
    logger.info(f"Compounded {len(volume)} vessel points from {len(sweeps)} sweeps ({mode} mode)")
    return volume


def stitching_gap(volume: CompoundVolume, sweep_before: int, sweep_after: int) -> float:
    """Distance between the vessel centroids of the last before-frame and the first after-frame."""
    centroids = []
    for sweep_id, pick in ((sweep_before, -1), (sweep_after, 0)):
        frames = np.unique(volume.frame_ids[volume.sweep_ids == sweep_id])
        if len(frames) == 0:
            raise UndefinedGapError(f"sweep {sweep_id} has no vessel points", {"sweep": sweep_id})
        centroids.append(volume.frame_points(sweep_id, int(frames[pick])).mean(axis=0))
    return float(np.linalg.norm(centroids[1] - centroids[0]))


def polyline_distance(points: ArrayLike, polyline: ArrayLike) -> NDArray[np.float64]:
    """Distance from each point to a polyline, checking the segments around the nearest vertex."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    polyline = np.asarray(polyline, dtype=np.float64)
    if len(polyline) < 2:
        raise InvalidArgumentError("a polyline needs at least two vertices")
    _, nearest = cKDTree(polyline).query(points)
    best = np.full(len(points), np.inf)
    for start in (nearest - 1, nearest):
        start = np.clip(start, 0, len(polyline) - 2)
        a, b = polyline[start], polyline[start + 1]
        ab = b - a
        t = np.clip(np.einsum("ij,ij->i", points - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
        best = np.minimum(best, np.linalg.norm(points - (a + t[:, None] * ab), axis=1))
    return best


def vessel_rms_error(volume: CompoundVolume, centerline: ArrayLike) -> float:
    """RMS distance of the compounded vessel points to the ground-truth centerline."""
    if len(volume) == 0:
        return float("nan")
    distances = polyline_distance(volume.points, centerline)
    return float(np.sqrt(np.mean(distances**2)))
