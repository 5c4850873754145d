"""Schemas for scripted phantom motion"""

from pydantic import BaseModel, Field, model_validator

from app.utils.constants import (
    MAX_MOTION_ROTATION_DEG,
    MAX_MOTION_TRANSLATION_MM,
    MOTION_RECTANGLE_MM,
)


class MotionEventSpec(BaseModel):
    """Rigid table motion triggered before a waypoint is executed"""
    trigger_waypoint: int = Field(..., ge=1)
    translation_mm: tuple[float, float] = (0.0, 0.0)
    rotation_deg: float = Field(default=0.0, description="rotation about the base Z axis through the phantom centroid")

    @model_validator(mode="after")
    def check_bounds(self) -> "MotionEventSpec":
        if any(abs(t) > MAX_MOTION_TRANSLATION_MM for t in self.translation_mm):
            raise ValueError(f"translation exceeds {MAX_MOTION_TRANSLATION_MM} mm per axis")
        if abs(self.rotation_deg) > MAX_MOTION_ROTATION_DEG:
            raise ValueError(f"rotation exceeds {MAX_MOTION_ROTATION_DEG} deg")
        return self


class RandomMotionSpec(BaseModel):
    """Seeded random motions sampled inside a rectangle"""
    count: int = Field(default=1, ge=1)
    rectangle_mm: tuple[float, float] = MOTION_RECTANGLE_MM
    max_rotation_deg: float = Field(default=MAX_MOTION_ROTATION_DEG / 2, ge=0, le=MAX_MOTION_ROTATION_DEG)
    first_trigger: int = Field(default=20, ge=1)
    spacing: int = Field(default=20, ge=1, description="waypoints between consecutive triggers")

    @model_validator(mode="after")
    def check_rectangle(self) -> "RandomMotionSpec":
        if any(side <= 0 or side / 2 > MAX_MOTION_TRANSLATION_MM for side in self.rectangle_mm):
            raise ValueError("rectangle sides must be positive and within the translation bound")
        return self


class MotionScriptSpec(BaseModel):
    """Explicit motion events, or a random generator, or nothing (static scan)"""
    events: list[MotionEventSpec] = Field(default_factory=list)
    random: RandomMotionSpec | None = None

    @model_validator(mode="after")
    def check_triggers(self) -> "MotionScriptSpec":
        triggers = [e.trigger_waypoint for e in self.events]
        if triggers != sorted(set(triggers)):
            raise ValueError("event triggers must be strictly increasing")
        if self.events and self.random is not None:
            raise ValueError("give either explicit events or a random generator")
        return self
