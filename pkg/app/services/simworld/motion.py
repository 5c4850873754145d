"""Scripted rigid table motion and the table-mounted fiducial."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from app.schemas.motion import MotionScriptSpec, RandomMotionSpec
from app.services.geom import RigidTransform, Vec3, as_vec3, rot_z
from app.services.simworld.phantom import Phantom
from app.utils.constants import MAX_MOTION_ROTATION_DEG, MAX_MOTION_TRANSLATION_MM
from app.utils.errors import InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("simworld.motion")


@dataclass(frozen=True)
class ScriptedMotion:
    """In-plane table motion fired before ``trigger`` (a waypoint index) is executed.

    The table rotates by ``rotation_deg`` about Z_b through the phantom
    centroid, then shifts by ``translation_mm`` in the XY plane.
    """

    trigger: int
    translation_mm: tuple[float, float]
    rotation_deg: float = 0.0

    def __post_init__(self) -> None:
        if self.trigger < 1:
            raise InvalidArgumentError("motion triggers start at waypoint 1")
        if any(abs(t) > MAX_MOTION_TRANSLATION_MM for t in self.translation_mm):
            raise InvalidArgumentError(f"motion translation exceeds {MAX_MOTION_TRANSLATION_MM} mm per axis")
        if abs(self.rotation_deg) > MAX_MOTION_ROTATION_DEG:
            raise InvalidArgumentError(f"motion rotation exceeds {MAX_MOTION_ROTATION_DEG} deg")

    def transform(self, pivot: ArrayLike) -> RigidTransform:
        tx, ty = self.translation_mm
        return RigidTransform.about_point(rot_z(self.rotation_deg), pivot, (tx, ty, 0.0))


@dataclass(frozen=True)
class MotionScript:
    motions: tuple[ScriptedMotion, ...] = ()

    def __post_init__(self) -> None:
        triggers = [m.trigger for m in self.motions]
        if triggers != sorted(set(triggers)):
            raise InvalidArgumentError("motion triggers must be strictly increasing")

    def __len__(self) -> int:
        return len(self.motions)

    def at(self, waypoint: int) -> ScriptedMotion | None:
        for motion in self.motions:
            if motion.trigger == waypoint:
                return motion
        return None

    @classmethod
    def from_spec(cls, spec: MotionScriptSpec, seed: int = 0) -> MotionScript:
        if spec.random is not None:
            return random_motion_script(spec.random, seed)
        return cls(
            tuple(
                ScriptedMotion(e.trigger_waypoint, tuple(e.translation_mm), e.rotation_deg)  # type: ignore[arg-type]
                for e in spec.events
            )
        )


def random_motion_script(spec: RandomMotionSpec, seed: int) -> MotionScript:
    """Motions sampled uniformly inside the rectangle and the rotation bound."""
    rng = np.random.default_rng(seed)
    half_x, half_y = spec.rectangle_mm[0] / 2.0, spec.rectangle_mm[1] / 2.0
    motions = []
    for i in range(spec.count):
        translation = (float(rng.uniform(-half_x, half_x)), float(rng.uniform(-half_y, half_y)))
        rotation = float(rng.uniform(-spec.max_rotation_deg, spec.max_rotation_deg))
        motions.append(ScriptedMotion(spec.first_trigger + i * spec.spacing, translation, rotation))
    return MotionScript(tuple(motions))


@dataclass(frozen=True, eq=False)
class Fiducial:
    """Table marker; moves rigidly with the phantom."""

    position: Vec3
    noise_mm: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", as_vec3(self.position))

    def moved(self, transform: RigidTransform) -> Fiducial:
        return Fiducial(transform.apply(self.position), self.noise_mm)

    def observe(self, seed: int) -> Vec3:
        """Detected marker position: the true position plus seeded isotropic noise."""
        if self.noise_mm <= 0:
            return as_vec3(self.position)
        rng = np.random.default_rng(seed)
        return as_vec3(self.position + rng.normal(0.0, self.noise_mm, 3))


@dataclass(frozen=True, eq=False)
class AppliedMotion:
    phantom: Phantom
    fiducial: Fiducial
    transform: RigidTransform | None
    motion: ScriptedMotion | None = None


def apply_motion_script(phantom: Phantom, fiducial: Fiducial, script: MotionScript, waypoint: int) -> AppliedMotion:
    """Apply the motion triggered at ``waypoint`` to the phantom and fiducial together."""
    motion = script.at(waypoint)
    if motion is None:
        return AppliedMotion(phantom, fiducial, None)
    transform = motion.transform(phantom.centroid)
    logger.info(
        f"[MOTION] table moved before waypoint {waypoint}: "
        f"shift=({motion.translation_mm[0]:.1f}, {motion.translation_mm[1]:.1f}) mm, rot={motion.rotation_deg:.1f} deg"
    )
    return AppliedMotion(phantom.moved(transform), fiducial.moved(transform), transform, motion)
