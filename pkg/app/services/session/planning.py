"""Planning stage: camera cloud, template registration and the base-frame trajectory."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from app.schemas.session import PlanReport, RegistrationRecord, SessionConfig
from app.services.geom import (
    PointCloud,
    RigidTransform,
    estimate_normals,
    poisson_disc_sample,
    transform_to_spec,
)
from app.services.monitor import CameraModel, mask_to_cloud
from app.services.planner import (
    HandEyeResult,
    Trajectory,
    extract_centerline,
    hand_eye_calibrate,
    orient_waypoints,
    project_centerline_to_surface,
    transfer_trajectory,
)
from app.services.registration import RegistrationResult, register_clouds
from app.services.simworld import CameraView, SimWorld
from app.utils.constants import NORMAL_NEIGHBOURS
from app.utils.errors import EmptyCloudError
from app.utils.logger import get_logger

logger = get_logger("session.planning")


def registration_record(result: RegistrationResult, source: PointCloud, target: PointCloud) -> RegistrationRecord:
    return RegistrationRecord(
        mse_history=list(result.mse_history),
        iterations=result.iterations,
        converged=result.converged,
        final_mse_mm=result.final_mse,
        source_points=len(source),
        target_points=len(target),
    )


def camera_cloud(view: CameraView, camera: CameraModel, config: SessionConfig, frame: int = 0) -> PointCloud:
    """Base-frame limb cloud of one RGB-D frame, Poisson-thinned, with normals facing the camera."""
    raw = mask_to_cloud(
        view.mask,
        view.depth_m,
        camera,
        z_cut_mm=config.thresholds.plane_cut_height_mm,
        seed=config.seed + frame,
    )
    thinned = poisson_disc_sample(raw, config.sampling.camera_radius_mm, seed=config.seed + frame)
    if len(thinned) < NORMAL_NEIGHBOURS:
        raise EmptyCloudError(f"only {len(thinned)} limb points after thinning")
    return estimate_normals(thinned, viewpoint=camera.center).to_cloud()


@dataclass(frozen=True, eq=False)
class PlanOutcome:
    trajectory: Trajectory  # base frame
    hand_eye: HandEyeResult
    registration: RegistrationResult
    ct_to_camera: RigidTransform
    template: PointCloud
    camera_cloud: PointCloud  # base frame
    centerline: np.ndarray  # base frame
    key_points: np.ndarray  # base frame, on the camera surface

    def report(self) -> PlanReport:
        return PlanReport(
            hand_eye=transform_to_spec(self.hand_eye.transform),
            hand_eye_residual_mm=self.hand_eye.residual_rms_mm,
            registration=registration_record(self.registration, self.camera_cloud, self.template),
            centerline_points=len(self.centerline),
            waypoints=len(self.trajectory),
            spacing_mm=self.trajectory.spacing,
        )


def plan_scan(
    world: SimWorld,
    config: SessionConfig,
    template: PointCloud | None = None,
    artery: PointCloud | None = None,
) -> PlanOutcome:
    """Calibrate the camera, register the camera cloud to the template and plan on the camera surface.

    Only the artery goes through the registration; key points and orientations come
    from the surface the camera sees. ``template`` and ``artery`` are the preoperative
    (CT-frame) clouds; they default to the ones derived from the world's phantom.
    """
    hand_eye = hand_eye_calibrate(world.hand_eye_pairs())
    estimated_camera = world.camera.with_pose(hand_eye.transform)

    view = world.camera_view(0)
    cloud_base = camera_cloud(view, estimated_camera, config)
    cloud_camera = cloud_base.transformed(hand_eye.transform.inverse())

    if template is None:
        template = world.phantom.template_cloud(config.sampling.template_points)
    if artery is None:
        artery = world.phantom.artery_cloud()
    registration = register_clouds(cloud_camera, template)
    ct_to_camera = registration.transform.inverse()

    thresholds = config.thresholds
    artery_base = transfer_trajectory(artery, ct_to_camera, hand_eye.transform)
    centerline = extract_centerline(artery_base, thresholds.centerline_interval_mm)
    key_points = project_centerline_to_surface(centerline, cloud_base, thresholds.surface_neighbours)
    trajectory = orient_waypoints(key_points, cloud_base, spacing=thresholds.centerline_interval_mm)

    logger.info(
        f"Planned {len(trajectory)} waypoints; template registration mse {registration.final_mse:.3f} mm"
    )
    return PlanOutcome(
        trajectory=trajectory,
        hand_eye=hand_eye,
        registration=registration,
        ct_to_camera=ct_to_camera,
        template=template,
        camera_cloud=cloud_base,
        centerline=centerline,
        key_points=key_points,
    )
