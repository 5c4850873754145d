"""Schemas for synthetic phantom generation"""

from typing import Literal

from pydantic import BaseModel, Field

from app.schemas.common import Vector3
from app.utils.constants import PHANTOM_LENGTH_MM


class PhantomParams(BaseModel):
    """Geometry of the synthetic arm phantom (mm)"""
    shape: Literal["tube", "slab"] = "tube"
    length_mm: float = Field(default=PHANTOM_LENGTH_MM, gt=0)
    arm_radius_mm: float = Field(default=40.0, gt=0, description="tube radius, or half width/height of a slab")
    vessel_radius_mm: float = Field(default=3.0, gt=0)
    vessel_depth_mm: float = Field(default=15.0, gt=0, description="vessel axis below the nominal top surface")
    roughness_mm: float = Field(default=2.0, ge=0, description="amplitude of the uneven-surface perturbation")
    vessel_wander_mm: float = Field(default=3.0, ge=0, description="lateral sinusoidal wander of the vessel")
    axial_step_mm: float = Field(default=2.0, gt=0, description="surface sampling step along the arm")
    angular_samples: int = Field(default=120, ge=8, description="surface samples around the tube")


class PlacementSpec(BaseModel):
    """Initial placement of the phantom on the table (rotation about Z_b, translation in mm)"""
    rotation_deg: float = Field(default=10.0, ge=-180, le=180)
    translation: Vector3 = (15.0, -10.0, 0.0)


class FiducialSpec(BaseModel):
    """Table-mounted marker, in the phantom's local frame"""
    position: Vector3 = (260.0, 90.0, 0.0)
    noise_mm: float = Field(default=0.0, ge=0, description="detection noise of the marker position")
