"""Mutable simulated world owned by a single scan session."""

from __future__ import annotations

import numpy as np

from app.schemas.session import SessionConfig
from app.services.geom import RigidTransform, rot_z
from app.services.monitor import CameraModel
from app.services.planner import CalibrationSet
from app.services.simworld.camera import CameraView, render_camera_view
from app.services.simworld.contact import simulate_contact_step
from app.services.simworld.motion import AppliedMotion, Fiducial, MotionScript, apply_motion_script
from app.services.simworld.phantom import Phantom, gen_phantom
from app.services.simworld.ultrasound import BModeFrame, render_bmode
from app.utils.logger import get_logger

logger = get_logger("simworld")

CAMERA_RATE_HZ = 30.0
HAND_EYE_PAIRS = 20

# Independent random streams per frame.
STREAM_CAMERA = 1
STREAM_BMODE = 2
STREAM_FIDUCIAL = 3
STREAM_HAND_EYE = 4


def frame_seed(seed: int, frame: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, frame, stream]).generate_state(1)[0])


def placement_transform(rotation_deg: float, translation) -> RigidTransform:
    return RigidTransform(rot_z(rotation_deg), translation)


class SimWorld:
    """Phantom, fiducial and sensors. Only ``apply_motion`` changes the phantom pose."""

    def __init__(
        self,
        phantom: Phantom,
        fiducial: Fiducial,
        camera: CameraModel,
        calib: CalibrationSet,
        config: SessionConfig,
    ):
        self.phantom = phantom
        self.fiducial = fiducial
        self.camera = camera
        self.calib = calib
        self.config = config
        self.seed = config.seed
        self.motions: list[AppliedMotion] = []

    @classmethod
    def from_config(cls, config: SessionConfig, calib: CalibrationSet, camera: CameraModel) -> SimWorld:
        placement = placement_transform(config.placement.rotation_deg, config.placement.translation)
        phantom = gen_phantom(config.seed, config.phantom, placement)
        fiducial = Fiducial(placement.apply(np.asarray(config.fiducial.position)), config.fiducial.noise_mm)
        return cls(phantom, fiducial, camera, calib, config)

    def camera_view(self, frame: int, occluder_fraction: float | None = None) -> CameraView:
        noise = self.config.noise
        return render_camera_view(
            self.phantom,
            self.camera,
            depth_noise_mm=noise.depth_noise_mm,
            occluder_fraction=noise.occluder_fraction if occluder_fraction is None else occluder_fraction,
            seed=frame_seed(self.seed, frame, STREAM_CAMERA),
            timestamp=frame / CAMERA_RATE_HZ,
        )

    def contact_step(self, target: RigidTransform) -> RigidTransform:
        """Press the probe onto the skin at ``target``; returns the flange pose the robot reports."""
        contact = self.config.contact
        probe_pose = simulate_contact_step(target, self.phantom, contact.force_n, contact.stiffness_n_per_m)
        return self.calib.flange_pose_from_probe(probe_pose)

    def bmode(self, probe_pose: RigidTransform, frame: int) -> BModeFrame:
        return render_bmode(
            self.phantom,
            probe_pose,
            self.calib,
            seed=frame_seed(self.seed, frame, STREAM_BMODE),
            speckle_sigma=self.config.noise.speckle_sigma,
        )

    def observe_fiducial(self, frame: int) -> np.ndarray:
        return self.fiducial.observe(frame_seed(self.seed, frame, STREAM_FIDUCIAL))

    def apply_motion(self, script: MotionScript, waypoint: int) -> AppliedMotion:
        applied = apply_motion_script(self.phantom, self.fiducial, script, waypoint)
        if applied.transform is not None:
            self.phantom, self.fiducial = applied.phantom, applied.fiducial
            self.motions.append(applied)
        return applied

    def hand_eye_pairs(self, count: int = HAND_EYE_PAIRS) -> list[tuple[np.ndarray, np.ndarray]]:
        """Tool-tip positions seen by the camera paired with the robot's base-frame readings."""
        rng = np.random.default_rng(frame_seed(self.seed, 0, STREAM_HAND_EYE))
        base = np.column_stack(
            [rng.uniform(-200.0, 200.0, count), rng.uniform(-150.0, 150.0, count), rng.uniform(20.0, 250.0, count)]
        )
        camera_points = self.camera.pose.inverse().apply(base)
        camera_points = camera_points + rng.normal(0.0, self.config.noise.hand_eye_noise_mm, camera_points.shape)
        return list(zip(camera_points, base))
