"""Binary PGM (P5) read/write through Pillow, 8-bit and 16-bit."""

from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from PIL import Image

from app.utils.errors import InvalidArgumentError


def write_pgm(path: str | Path, values: NDArray, bits: int = 8) -> Path:
    """Write an integer grid as PGM; values must already fit the bit depth."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.asarray(values)
    if values.ndim != 2:
        raise InvalidArgumentError(f"PGM images are 2-D, got shape {values.shape}")
    limit = 255 if bits == 8 else 65535
    if bits not in (8, 16):
        raise InvalidArgumentError("PGM bit depth must be 8 or 16")
    if values.size and (values.min() < 0 or values.max() > limit):
        raise InvalidArgumentError(f"values outside [0, {limit}]")

    if bits == 8:
        image = Image.fromarray(values.astype(np.uint8), mode="L")
    else:
        image = Image.fromarray(values.astype(np.uint16), mode="I;16")
    image.save(path, format="PPM")
    return path


def read_pgm(path: str | Path) -> NDArray[np.int64]:
    """Read a PGM as an integer grid (8 or 16 bit)."""
    path = Path(path)
    if not path.is_file():
        raise InvalidArgumentError(f"image file {path} not found")
    with Image.open(path) as image:
        return np.asarray(image).astype(np.int64)


def write_unit_pgm(path: str | Path, values: NDArray[np.float64]) -> Path:
    """Write intensities in [0, 1] as 8-bit PGM."""
    return write_pgm(path, np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8))


def read_unit_pgm(path: str | Path) -> NDArray[np.float64]:
    return read_pgm(path).astype(np.float64) / 255.0
