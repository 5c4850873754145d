"""Deterministic desk-scale stand-ins for the phantom, the sensors and the robot contact."""

from app.services.simworld.camera import CameraView, render_camera_view, render_cloud_view
from app.services.simworld.contact import penetration_depth, simulate_contact_step
from app.services.simworld.motion import (
    AppliedMotion,
    Fiducial,
    MotionScript,
    ScriptedMotion,
    apply_motion_script,
    random_motion_script,
)
from app.services.simworld.phantom import Phantom, PhantomGeometry, gen_phantom
from app.services.simworld.ultrasound import BModeFrame, contact_fraction, element_lift, render_bmode
from app.services.simworld.world import SimWorld, frame_seed, placement_transform

__all__ = [
    "CameraView",
    "render_camera_view",
    "render_cloud_view",
    "penetration_depth",
    "simulate_contact_step",
    "AppliedMotion",
    "Fiducial",
    "MotionScript",
    "ScriptedMotion",
    "apply_motion_script",
    "random_motion_script",
    "Phantom",
    "PhantomGeometry",
    "gen_phantom",
    "BModeFrame",
    "contact_fraction",
    "element_lift",
    "render_bmode",
    "SimWorld",
    "frame_seed",
    "placement_transform",
]
