"""B-mode synthesis with contact-dependent shadowing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from app.services.confidence import UsImage
from app.services.geom import RigidTransform
from app.services.monitor import Mask
from app.services.planner import CalibrationSet
from app.services.simworld.phantom import Phantom
from app.utils.constants import CONTACT_TOLERANCE_MM, SPECKLE_SIGMA
from app.utils.errors import InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("simworld.ultrasound")

TISSUE_INTENSITY = 0.5
LUMEN_INTENSITY = 0.05
WALL_INTENSITY = 0.9
WALL_THICKNESS_MM = 0.8
REVERBERATION_INTENSITY = 0.95
REVERBERATION_DEPTH = 0.06  # fraction of the image height
DROPOUT_INTENSITY = 0.02
MAX_STANDOFF_MM = 20.0
VISIBLE_CONTACT = 0.5


@dataclass(frozen=True, eq=False)
class BModeFrame:
    image: UsImage
    vessel_mask: Mask
    contact_fraction: NDArray[np.float64]  # per image column

    @property
    def lost_fraction(self) -> float:
        """Share of columns with less than half contact."""
        return float(np.mean(self.contact_fraction < VISIBLE_CONTACT))


def element_lift(phantom: Phantom, probe_pose: RigidTransform, calib: CalibrationSet) -> NDArray[np.float64]:
    """Gap (mm) between each transducer element and the skin along Z_p; negative when pressed in, inf if no skin."""
    columns = np.arange(calib.image_width_px, dtype=np.float64)
    elements = calib.pixels_to_probe(np.column_stack([columns, np.zeros_like(columns)]))
    elements[:, 2] = 0.0
    entry = phantom.surface_entry(probe_pose.apply(elements), probe_pose.rotation[:, 2])
    return np.where(np.isnan(entry), np.inf, entry)


def contact_fraction(
    phantom: Phantom,
    probe_pose: RigidTransform,
    calib: CalibrationSet,
    tolerance_mm: float = CONTACT_TOLERANCE_MM,
) -> NDArray[np.float64]:
    """Per-column contact in [0, 1]: 1 - lift / tolerance, clamped."""
    return np.clip(1.0 - element_lift(phantom, probe_pose, calib) / tolerance_mm, 0.0, 1.0)


def render_bmode(
    phantom: Phantom,
    probe_pose: RigidTransform,
    calib: CalibrationSet,
    seed: int = 0,
    speckle_sigma: float = SPECKLE_SIGMA,
    contact_tolerance_mm: float = CONTACT_TOLERANCE_MM,
) -> BModeFrame:
    """Render the Y_p-Z_p image plane of a probe at ``probe_pose``.

    Tissue is uniform; the vessel is a dark lumen with a bright wall. Columns
    whose element lost contact fade to a reverberation band over dropout.
    """
    tip_entry = phantom.surface_entry(probe_pose.translation, probe_pose.rotation[:, 2])[0]
    if np.isnan(tip_entry) or abs(tip_entry) > MAX_STANDOFF_MM:
        raise InvalidArgumentError(
            f"probe is not within {MAX_STANDOFF_MM} mm of the skin",
            {"standoff_mm": None if np.isnan(tip_entry) else float(tip_entry)},
        )

    height, width = calib.image_shape
    rows, cols = np.mgrid[0:height, 0:width]
    pixels = np.column_stack([cols.ravel(), rows.ravel()]).astype(np.float64)
    points = calib.pixels_to_base(pixels, probe_pose).reshape(height, width, 3)

    tissue = phantom.inside(points)
    distance = phantom.vessel_distance(points)
    radius = phantom.vessel_radius
    lumen = tissue & (distance < radius)
    wall = tissue & (distance >= radius) & (distance < radius + WALL_THICKNESS_MM)

    intensity = np.where(tissue, TISSUE_INTENSITY, 0.0)
    intensity = np.where(wall, WALL_INTENSITY, intensity)
    intensity = np.where(lumen, LUMEN_INTENSITY, intensity)

    contact = contact_fraction(phantom, probe_pose, calib, contact_tolerance_mm)
    reverberation = np.where(rows[:, :1] < REVERBERATION_DEPTH * height, REVERBERATION_INTENSITY, DROPOUT_INTENSITY)
    intensity = contact[None, :] * intensity + (1.0 - contact[None, :]) * reverberation

    if speckle_sigma > 0:
        rng = np.random.default_rng(seed)
        intensity = intensity * (1.0 + speckle_sigma * rng.standard_normal(intensity.shape))
    intensity = np.clip(intensity, 0.0, 1.0)

    vessel = lumen & (contact[None, :] >= VISIBLE_CONTACT)
    if not vessel.any():
        logger.debug("B-mode frame without vessel cross-section")
    return BModeFrame(UsImage(intensity), Mask(vessel), contact)
