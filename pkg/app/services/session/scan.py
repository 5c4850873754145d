"""Scan stage: execute the trajectory, correct orientation, watch for motion and compensate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from app.schemas.session import MotionRecord, ScanReport, SessionConfig
from app.services.compensate import (
    BreakPoint,
    SweepFrame,
    SweepRecord,
    evaluate_emc,
    fine_adjust_poses,
    inplane_adjust,
    register_motion,
    retarget_trajectory,
)
from app.services.confidence import confidence_map, evaluate_correction, update_lookahead
from app.services.geom import PointCloud, RigidTransform
from app.services.monitor import CameraModel, MotionDetector, MotionEvent
from app.services.planner import Trajectory
from app.services.session.planning import camera_cloud, registration_record
from app.services.simworld import BModeFrame, CameraView, MotionScript, SimWorld
from app.utils.errors import (
    CompensationRejectedError,
    ContactLostError,
    NoSignalError,
    ScanPilotError,
    UndefinedAngleError,
)
from app.utils.logger import get_logger

logger = get_logger("session.scan")


@dataclass
class ScanOutcome:
    sweeps: list[SweepRecord] = field(default_factory=list)
    frames: int = 0
    corrections: list[float] = field(default_factory=list)
    contact_losses: int = 0
    motions: list[MotionRecord] = field(default_factory=list)
    aborted: bool = False
    error: ScanPilotError | None = None

    def report(self) -> ScanReport:
        return ScanReport(
            frames=self.frames,
            sweeps=len(self.sweeps),
            corrections=len(self.corrections),
            mean_abs_correction_deg=float(np.mean(np.abs(self.corrections))) if self.corrections else 0.0,
            contact_losses=self.contact_losses,
            motions=self.motions,
            aborted=self.aborted,
        )


@dataclass
class _PendingAdjustment:
    """Motion waiting for the first after-frame before the earlier sweeps can be re-posed."""

    motion: RigidTransform
    last_before: RigidTransform
    centroid_before: tuple[float, float] | None


class ScanRunner:
    """Single-threaded scan loop over a mutable SimWorld.

    Camera frame k and detector frame k are the same frame. Waypoint numbers
    refer to the planned trajectory; after a re-target the loop resumes at the
    break point's number.
    """

    def __init__(
        self,
        world: SimWorld,
        config: SessionConfig,
        trajectory: Trajectory,
        script: MotionScript,
        keep_images: bool = False,
    ):
        self.world = world
        self.config = config
        self.trajectory = trajectory
        self.script = script
        self.keep_images = keep_images
        self.detector = MotionDetector(config.thresholds.dice)
        self.outcome = ScanOutcome()

        self._frame = 0
        self._waypoint_base = 0
        self._fired: set[int] = set()
        self._sweep = SweepRecord(0)
        self._reference_cloud: PointCloud | None = None
        self._reference_marker: np.ndarray | None = None
        self._pending: _PendingAdjustment | None = None

    @property
    def estimated_camera(self) -> CameraModel:
        """The camera as the robot knows it: intrinsics plus the calibrated hand-eye pose."""
        return self.world.camera.with_pose(self.world.calib.hand_eye)

    # Monitoring

    def _set_reference(self, view: CameraView) -> None:
        self._reference_cloud = camera_cloud(view, self.estimated_camera, self.config, self._frame)
        self._reference_marker = self.world.observe_fiducial(self._frame)

    def _close_sweep(self) -> None:
        self.outcome.sweeps.append(self._sweep)
        self._sweep = SweepRecord(self._sweep.sweep_id + 1)

    def _motion_record(self, event: MotionEvent, waypoint: int) -> MotionRecord:
        applied = self.world.motions[-1] if self.world.motions else None
        return MotionRecord(
            frame=event.frame,
            waypoint=waypoint,
            reference_frame=event.reference_frame,
            dice=event.dice,
            true_translation_mm=float(np.linalg.norm(applied.transform.translation)) if applied else 0.0,
            true_rotation_deg=applied.transform.rotation_angle_deg() if applied else 0.0,
        )

    def _handle_motion(self, event: MotionEvent, view: CameraView, index: int, waypoint: int) -> int | None:
        """Stop, register, gate and re-target. Returns the index to resume at, or None to abort."""
        record = self._motion_record(event, waypoint)
        before_cloud, before_marker = self._reference_cloud, self._reference_marker
        self.detector.reset(view.mask)
        self._set_reference(view)

        if not self.config.toggles.compensate:
            self.outcome.motions.append(record)
            if not self._sweep.is_empty:
                self._close_sweep()
            return index

        registration = register_motion(before_cloud, self._reference_cloud)
        motion = registration.transform
        offset = self.config.noise.registration_offset_mm
        if offset > 0:
            motion = RigidTransform.from_translation((offset, 0.0, 0.0)) @ motion
        result = evaluate_emc(before_marker, self._reference_marker, motion, self.config.thresholds.emc_gate_mm)
        self.outcome.motions.append(
            record.model_copy(
                update={
                    "e_mc_mm": result.e_mc,
                    "accepted": result.accepted,
                    "registration": registration_record(registration, before_cloud, self._reference_cloud),
                }
            )
        )

        last = self._sweep.frames[-1] if self._sweep.frames else None
        if last is None:
            breakpoint = BreakPoint(index, self.trajectory[index].pose, -1)
        else:
            breakpoint = BreakPoint(index - 1, last.pose, last.frame)
        if len(self.trajectory) - breakpoint.index < 2:
            logger.warning(f"[MOTION] motion at the last waypoint {waypoint}; nothing left to re-target")
            return len(self.trajectory)
        try:
            remaining = retarget_trajectory(self.trajectory, breakpoint, result)
        except CompensationRejectedError as e:
            logger.error(f"[GATE] sweep ended at waypoint {waypoint}: {e.message}")
            self.outcome.aborted = True
            self.outcome.error = e
            return None

        if last is not None:
            self._pending = _PendingAdjustment(motion, last.pose, last.centroid)
            self._close_sweep()
        elif self._pending is not None:
            # moved again before the first after-frame: the earlier sweeps follow both motions
            self._pending.motion = motion @ self._pending.motion
        self.trajectory = remaining
        self._waypoint_base = waypoint - (index - breakpoint.index)
        return 0

    # Imaging

    def _image(self, target: RigidTransform) -> tuple[RigidTransform, BModeFrame]:
        flange = self.world.contact_step(target)
        probe_pose = self.world.calib.probe_pose_from_flange(flange)
        return probe_pose, self.world.bmode(probe_pose, self._frame)

    def _correct(self, index: int, frame: BModeFrame) -> bool:
        """Update the look-ahead orientations when the frame shows a one-sided shadow."""
        if not self.config.toggles.confidence_correction:
            return False
        spec = self.config.confidence
        try:
            cmap = confidence_map(frame.image, spec.alpha, spec.beta, spec.gamma, spec.downsample)
            correction = evaluate_correction(cmap, self.world.calib, self.config.thresholds.confidence)
        except (NoSignalError, UndefinedAngleError) as e:
            logger.warning(f"Confidence correction skipped at waypoint {self._waypoint_base + index}: {e.message}")
            return False
        if not correction.shadow_detected:
            return False
        self.trajectory = update_lookahead(
            self.trajectory, index, correction.angle_deg, self.config.thresholds.lookahead
        )
        self.outcome.corrections.append(correction.angle_deg)
        return True

    def _apply_pending(self, first_after: SweepFrame) -> None:
        pending, self._pending = self._pending, None
        earlier = self.outcome.sweeps
        if not self.config.toggles.fine_adjust:
            self.outcome.sweeps = [s.with_poses([pending.motion @ p for p in s.poses]) for s in earlier]
            return

        boundary = fine_adjust_poses(earlier[-1], pending.motion, pending.last_before, first_after.pose)
        correction = boundary.frames[0].pose @ earlier[-1].frames[0].pose.inverse()
        boundary = inplane_adjust(
            boundary, pending.centroid_before, first_after.centroid, self.world.calib, first_after.pose.rotation
        )
        # older sweeps are rigidly attached to the boundary sweep
        shift = boundary.frames[0].pose.translation - (correction @ earlier[-1].frames[0].pose).translation

        def follow(pose: RigidTransform) -> RigidTransform:
            moved = correction @ pose
            return moved.with_translation(moved.translation + shift)

        self.outcome.sweeps = [s.with_poses([follow(p) for p in s.poses]) for s in earlier[:-1]] + [boundary]

    # Loop

    def run(self) -> ScanOutcome:
        first_view = self.world.camera_view(0)
        self.detector.observe(first_view.mask)
        self._set_reference(first_view)

        index = 0
        while index < len(self.trajectory):
            waypoint = self._waypoint_base + index
            if waypoint not in self._fired and self.world.apply_motion(self.script, waypoint).transform is not None:
                self._fired.add(waypoint)
            self._frame += 1
            view = self.world.camera_view(self._frame)
            event = self.detector.observe(view.mask)
            if event is not None:
                resume = self._handle_motion(event, view, index, waypoint)
                if resume is None:
                    break
                index = resume
                continue

            try:
                executed, bmode = self._image(self.trajectory[index].pose)
                if self._correct(index, bmode):
                    executed, bmode = self._image(self.trajectory[index].pose)
            except ContactLostError as e:
                self.outcome.contact_losses += 1
                logger.warning(f"Contact lost at waypoint {waypoint}: {e.message}")
                index += 1
                continue

            sweep_frame = SweepFrame(
                frame=self._frame,
                waypoint=waypoint,
                pose=executed,
                vessel_mask=bmode.vessel_mask,
                image=bmode.image if self.keep_images else None,
            )
            self._sweep = self._sweep.appended(sweep_frame)
            if self._pending is not None:
                self._apply_pending(sweep_frame)
            index += 1

        if not self._sweep.is_empty:
            self._close_sweep()
        self.outcome.frames = self._frame
        logger.info(
            f"Scan finished: {self.outcome.frames} frames, {len(self.outcome.sweeps)} sweeps, "
            f"{len(self.outcome.corrections)} corrections, aborted={self.outcome.aborted}"
        )
        return self.outcome
