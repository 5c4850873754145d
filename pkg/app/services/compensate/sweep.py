"""Tracked B-mode sweeps and their on-disk layout."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from app.services.confidence import UsImage
from app.services.geom import RigidTransform
from app.services.monitor import Mask
from app.utils.errors import InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("compensate.sweep")

POSES_FILE = "poses.csv"
POSES_HEADER = "frame,waypoint,x,y,z,qx,qy,qz,qw,centroid_w,centroid_h"


@dataclass(frozen=True, eq=False)
class SweepFrame:
    """One tracked frame: probe pose, vessel segmentation and its centroid (w, h) in px."""

    frame: int
    waypoint: int
    pose: RigidTransform
    centroid: tuple[float, float] | None = None
    vessel_mask: Mask | None = None
    image: UsImage | None = None

    def __post_init__(self) -> None:
        if self.centroid is None and self.vessel_mask is not None and not self.vessel_mask.is_empty:
            row, col = self.vessel_mask.centroid()
            object.__setattr__(self, "centroid", (col, row))
        if self.centroid is not None and self.vessel_mask is not None:
            height, width = self.vessel_mask.shape
            w, h = self.centroid
            if not (0 <= w < width and 0 <= h < height):
                raise InvalidArgumentError(f"vessel centroid {self.centroid} outside the image")

    def with_pose(self, pose: RigidTransform) -> SweepFrame:
        return dataclasses.replace(self, pose=pose)


@dataclass(frozen=True, eq=False)
class SweepRecord:
    sweep_id: int
    frames: tuple[SweepFrame, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(self.frames))

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def is_empty(self) -> bool:
        return not self.frames

    @property
    def poses(self) -> list[RigidTransform]:
        return [f.pose for f in self.frames]

    def appended(self, frame: SweepFrame) -> SweepRecord:
        return SweepRecord(self.sweep_id, self.frames + (frame,))

    def with_poses(self, poses: Sequence[RigidTransform]) -> SweepRecord:
        if len(poses) != len(self.frames):
            raise InvalidArgumentError("one pose per frame is required")
        return SweepRecord(self.sweep_id, tuple(f.with_pose(p) for f, p in zip(self.frames, poses)))

    def last_with_vessel(self) -> SweepFrame | None:
        return next((f for f in reversed(self.frames) if f.centroid is not None), None)

    def first_with_vessel(self) -> SweepFrame | None:
        return next((f for f in self.frames if f.centroid is not None), None)

    def save(self, directory: str | Path, images: bool = False) -> Path:
        """poses.csv plus, when present, masks/*.pgm and (with ``images``) frames/*.pgm."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        rows = []
        for f in self.frames:
            w, h = f.centroid if f.centroid is not None else (np.nan, np.nan)
            rows.append(
                np.concatenate([[f.frame, f.waypoint], f.pose.translation, f.pose.as_quaternion(), [w, h]])
            )
            if f.vessel_mask is not None:
                f.vessel_mask.save(directory / "masks" / f"mask_{f.frame:05d}.pgm")
            if images and f.image is not None:
                f.image.save(directory / "frames" / f"frame_{f.frame:05d}.pgm")
        table = np.array(rows).reshape(-1, 11)
        np.savetxt(
            directory / POSES_FILE,
            table,
            delimiter=",",
            header=POSES_HEADER,
            comments="",
            fmt=["%d", "%d"] + ["%.17g"] * 9,
        )
        return directory

    @classmethod
    def load(cls, directory: str | Path, sweep_id: int = 0) -> SweepRecord:
        directory = Path(directory)
        path = directory / POSES_FILE
        if not path.is_file():
            raise InvalidArgumentError(f"sweep file {path} not found")
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        frames = []
        for row in table:
            frame = int(row[0])
            mask_path = directory / "masks" / f"mask_{frame:05d}.pgm"
            image_path = directory / "frames" / f"frame_{frame:05d}.pgm"
            centroid = None if np.isnan(row[9]) else (float(row[9]), float(row[10]))
            frames.append(
                SweepFrame(
                    frame=frame,
                    waypoint=int(row[1]),
                    pose=RigidTransform.from_quaternion(row[5:9], row[2:5]),
                    centroid=centroid,
                    vessel_mask=Mask.load(mask_path) if mask_path.is_file() else None,
                    image=UsImage.load(image_path) if image_path.is_file() else None,
                )
            )
        logger.debug(f"Loaded sweep {sweep_id} with {len(frames)} frames from {directory}")
        return cls(sweep_id, tuple(frames))


def shift_positions(sweep: SweepRecord, offset: ArrayLike) -> SweepRecord:
    offset = np.asarray(offset, dtype=np.float64)
    return sweep.with_poses([p.with_translation(p.translation + offset) for p in sweep.poses])
