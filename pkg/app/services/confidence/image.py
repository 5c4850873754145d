"""B-mode images and confidence maps as value grids."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.utils.errors import InvalidArgumentError
from app.utils.pgm import read_unit_pgm, write_unit_pgm


def _frozen_grid(values: ArrayLike, name: str) -> NDArray[np.float64]:
    grid = np.array(values, dtype=np.float64, copy=True)
    if grid.ndim != 2 or grid.size == 0:
        raise InvalidArgumentError(f"{name} must be a non-empty 2-D grid, got shape {grid.shape}")
    if not np.all(np.isfinite(grid)):
        raise InvalidArgumentError(f"{name} must be finite")
    if grid.min() < 0.0 or grid.max() > 1.0:
        raise InvalidArgumentError(f"{name} values must lie in [0, 1]")
    grid.flags.writeable = False
    return grid


@dataclass(frozen=True, eq=False)
class UsImage:
    """B-mode intensities in [0, 1]; rows go away from the transducer."""

    intensities: NDArray[np.float64]

    def __post_init__(self) -> None:
        object.__setattr__(self, "intensities", _frozen_grid(self.intensities, "intensities"))

    @property
    def height(self) -> int:
        return self.intensities.shape[0]

    @property
    def width(self) -> int:
        return self.intensities.shape[1]

    def mirrored(self) -> UsImage:
        """Left-right flip (lateral mirror)."""
        return UsImage(self.intensities[:, ::-1])

    def save(self, path: str | Path) -> Path:
        return write_unit_pgm(path, self.intensities)

    @classmethod
    def load(cls, path: str | Path) -> UsImage:
        return cls(read_unit_pgm(path))


@dataclass(frozen=True, eq=False)
class ConfidenceMap:
    """Per-pixel confidence C(h, w): 1 on the transducer row, 0 on the last row."""

    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        values = _frozen_grid(self.values, "confidence values")
        if values.shape[0] < 2:
            raise InvalidArgumentError("a confidence map needs at least two rows")
        if np.any(values[0] != 1.0) or np.any(values[-1] != 0.0):
            raise InvalidArgumentError("confidence boundary rows must be exactly 1 (top) and 0 (bottom)")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def save(self, path: str | Path) -> Path:
        return write_unit_pgm(path, self.values)
