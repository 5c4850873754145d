"""Constant-force contact surrogate for the compliant controller."""

from __future__ import annotations

import numpy as np

from app.services.geom import RigidTransform
from app.services.simworld.phantom import Phantom
from app.utils.constants import CONTACT_FORCE_N, CONTACT_SEARCH_MM, CONTACT_STIFFNESS_N_PER_M, STIFFNESS_RANGE_N_PER_M
from app.utils.errors import ContactLostError, InvalidArgumentError


def penetration_depth(force_n: float, stiffness_n_per_m: float) -> float:
    """Spring law delta = F / k, in mm."""
    low, high = STIFFNESS_RANGE_N_PER_M
    if not low <= stiffness_n_per_m <= high:
        raise InvalidArgumentError(f"stiffness must be within [{low}, {high}] N/m")
    if force_n < 0:
        raise InvalidArgumentError("contact force must be non-negative")
    return 1000.0 * force_n / stiffness_n_per_m


def simulate_contact_step(
    target: RigidTransform,
    phantom: Phantom,
    force_n: float = CONTACT_FORCE_N,
    stiffness_n_per_m: float = CONTACT_STIFFNESS_N_PER_M,
) -> RigidTransform:
    """Slide the probe along Z_p until its tip sits F/k below the skin; orientation is kept."""
    delta = penetration_depth(force_n, stiffness_n_per_m)
    axis = target.rotation[:, 2]
    entry = phantom.surface_entry(target.translation, axis, CONTACT_SEARCH_MM)[0]
    if np.isnan(entry):
        raise ContactLostError(
            f"no skin along the probe axis within {CONTACT_SEARCH_MM} mm",
            {"position": [float(v) for v in target.translation]},
        )
    return target.with_translation(target.translation + (entry + delta) * axis)
