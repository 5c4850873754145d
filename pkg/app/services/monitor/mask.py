"""Binary segmentation masks and the dice overlap."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.utils.errors import InvalidArgumentError, UndefinedDiceError
from app.utils.pgm import read_pgm, write_pgm


@dataclass(frozen=True, eq=False)
class Mask:
    """Binary grid (camera or B-mode resolution) with its capture time in seconds."""

    values: NDArray[np.bool_]
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise InvalidArgumentError(f"a mask is a 2-D grid, got shape {values.shape}")
        if values.dtype != np.bool_:
            if not np.all(np.isin(values, (0, 1))):
                raise InvalidArgumentError("mask values must be 0 or 1")
            values = values.astype(bool)
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def empty(cls, shape: tuple[int, int], timestamp: float = 0.0) -> Mask:
        return cls(np.zeros(shape, dtype=bool), timestamp)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def area(self) -> int:
        return int(self.values.sum())

    @property
    def is_empty(self) -> bool:
        return not self.values.any()

    def centroid(self) -> tuple[float, float] | None:
        """Mean (row, column) of the set pixels, or None for an empty mask."""
        if self.is_empty:
            return None
        rows, cols = np.nonzero(self.values)
        return float(rows.mean()), float(cols.mean())

    def bounding_box(self) -> tuple[int, int, int, int] | None:
        """(row_min, row_max, col_min, col_max), inclusive."""
        if self.is_empty:
            return None
        rows, cols = np.nonzero(self.values)
        return int(rows.min()), int(rows.max()), int(cols.min()), int(cols.max())

    def save(self, path: str | Path) -> Path:
        return write_pgm(path, self.values.astype(np.uint8) * 255)

    @classmethod
    def load(cls, path: str | Path, timestamp: float = 0.0) -> Mask:
        return cls(read_pgm(path) > 127, timestamp)


def dice_coefficient(a: Mask | ArrayLike, b: Mask | ArrayLike) -> float:
    """2|a & b| / (|a| + |b|)."""
    va = a.values if isinstance(a, Mask) else np.asarray(a, dtype=bool)
    vb = b.values if isinstance(b, Mask) else np.asarray(b, dtype=bool)
    if va.shape != vb.shape:
        raise InvalidArgumentError(f"mask shapes differ: {va.shape} vs {vb.shape}")
    total = int(va.sum()) + int(vb.sum())
    if total == 0:
        raise UndefinedDiceError("both masks are empty")
    return 2.0 * int(np.logical_and(va, vb).sum()) / total
