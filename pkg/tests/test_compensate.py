from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from app.services.compensate import (
    BreakPoint,
    CompensationResult,
    SweepFrame,
    SweepRecord,
    compound_sweeps,
    evaluate_emc,
    fine_adjust_poses,
    inplane_adjust,
    polyline_distance,
    register_motion,
    retarget_trajectory,
    stitching_gap,
    vessel_rms_error,
)
from app.services.geom import PointCloud, RigidTransform, crop_along_principal_axis, rot_z
from app.services.monitor import Mask
from app.services.planner import ScanWaypoint, Trajectory
from app.utils.errors import CompensationRejectedError, InvalidArgumentError, UndefinedGapError


def _trajectory(n: int = 10, spacing: float = 5.0) -> Trajectory:
    return Trajectory(tuple(ScanWaypoint((i * spacing, 0.0, 0.0), np.eye(3)) for i in range(n)), spacing)


def _sweep(sweep_id: int, poses: list[RigidTransform], centroid=(187.0, 100.0)) -> SweepRecord:
    return SweepRecord(
        sweep_id, tuple(SweepFrame(frame=i, waypoint=i, pose=pose, centroid=centroid) for i, pose in enumerate(poses))
    )


def _accepted(transform: RigidTransform) -> CompensationResult:
    return CompensationResult(transform, 0.0, True)


@pytest.fixture
def template(tube):
    return tube.template_cloud(900)


# Motion recovery


def test_static_scene_recovers_identity(template):
    result = register_motion(template, template)
    assert result.transform.is_close(RigidTransform.identity(), atol=1e-6)


def test_table_motion_is_recovered(template):
    motion = RigidTransform.about_point(rot_z(60.0), template.centroid, (40.0, -50.0, 0.0))
    result = register_motion(template, template.transformed(motion))
    error = motion.inverse() @ result.transform
    assert error.rotation_angle_deg() < 2.0
    assert np.linalg.norm(error.translation) < 2.0


def test_occluded_after_cloud_still_registers(template):
    motion = RigidTransform.about_point(rot_z(-25.0), template.centroid, (30.0, 20.0, 0.0))
    after = crop_along_principal_axis(template.transformed(motion), 0.4, 1.0)
    result = register_motion(template, after)
    assert result.final_mse < 1.0
    assert (motion.inverse() @ result.transform).rotation_angle_deg() < 2.0


def test_motion_clouds_need_enough_points(template):
    with pytest.raises(InvalidArgumentError):
        register_motion(template.subset(np.arange(10)), template)


# Gate


def test_exact_motion_has_zero_error():
    motion = RigidTransform(rot_z(20.0), (5.0, -3.0, 0.0))
    marker = np.array([100.0, 50.0, 0.0])
    result = evaluate_emc(marker, motion.apply(marker), motion)
    assert result.e_mc == pytest.approx(0.0, abs=1e-12)
    assert result.accepted


def test_identity_estimate_costs_the_full_shift():
    marker = np.array([100.0, 50.0, 0.0])
    result = evaluate_emc(marker, marker + [3.0, 4.0, 0.0], RigidTransform.identity())
    assert result.e_mc == pytest.approx(5.0)
    assert result.accepted


def test_gate_is_strict():
    marker = np.zeros(3)
    assert not evaluate_emc(marker, [10.0, 0.0, 0.0], RigidTransform.identity(), gate_mm=10.0).accepted
    assert evaluate_emc(marker, [9.99, 0.0, 0.0], RigidTransform.identity(), gate_mm=10.0).accepted


# Re-targeting


def test_identity_keeps_the_tail():
    trajectory = _trajectory()
    breakpoint = BreakPoint(4, trajectory[4].pose, 4)
    tail = retarget_trajectory(trajectory, breakpoint, _accepted(RigidTransform.identity()))
    assert len(tail) == 6
    np.testing.assert_array_equal(tail.positions, trajectory.positions[4:])


def test_translation_shifts_the_tail():
    trajectory = _trajectory()
    breakpoint = BreakPoint(2, trajectory[2].pose, 2)
    tail = retarget_trajectory(trajectory, breakpoint, _accepted(RigidTransform.from_translation((0.0, 7.0, 0.0))))
    np.testing.assert_allclose(tail.positions, trajectory.positions[2:] + [0.0, 7.0, 0.0])
    for waypoint in tail:
        np.testing.assert_allclose(waypoint.rotation, np.eye(3), atol=1e-12)


def test_motion_retargets_like_moving_the_trajectory():
    trajectory = _trajectory()
    motion = RigidTransform.about_point(rot_z(30.0), (20.0, 0.0, 0.0), (10.0, 5.0, 0.0))
    tail = retarget_trajectory(trajectory, BreakPoint(3, trajectory[3].pose, 3), _accepted(motion))
    for a, b in zip(tail, trajectory.tail(3).transformed(motion)):
        assert a.pose.is_close(b.pose, atol=1e-9)


def test_rejected_compensation_ends_the_sweep():
    trajectory = _trajectory()
    rejected = CompensationResult(RigidTransform.identity(), 12.0, False)
    with pytest.raises(CompensationRejectedError) as excinfo:
        retarget_trajectory(trajectory, BreakPoint(2, trajectory[2].pose, 2), rejected)
    assert excinfo.value.details["e_mc_mm"] == 12.0


def test_break_point_must_lie_on_the_trajectory():
    trajectory = _trajectory()
    with pytest.raises(InvalidArgumentError):
        retarget_trajectory(trajectory, BreakPoint(10, RigidTransform.identity(), 0), _accepted(RigidTransform.identity()))


# Fine adjustment


def test_last_before_pose_lands_on_first_after(rng):
    poses = [RigidTransform.from_translation((i * 2.0, 0.0, 0.0)) for i in range(5)]
    motion = RigidTransform(rot_z(15.0), (3.0, 1.0, 0.0))
    first_after = RigidTransform(rot_z(16.0), (12.0, 5.0, 0.5))
    adjusted = fine_adjust_poses(_sweep(0, poses), motion, poses[-1], first_after)
    assert adjusted.poses[-1].is_close(first_after, atol=1e-9)
    step_before = poses[0].inverse() @ poses[1]
    step_after = adjusted.poses[0].inverse() @ adjusted.poses[1]
    assert step_after.is_close(step_before, atol=1e-9)


def test_perfect_compensation_only_applies_the_motion():
    poses = [RigidTransform.from_translation((i * 2.0, 0.0, 0.0)) for i in range(4)]
    motion = RigidTransform(rot_z(-10.0), (0.0, 4.0, 0.0))
    adjusted = fine_adjust_poses(_sweep(0, poses), motion, poses[-1], motion @ poses[-1])
    for got, pose in zip(adjusted.poses, poses):
        assert got.is_close(motion @ pose, atol=1e-9)


def test_empty_sweep_cannot_be_adjusted():
    with pytest.raises(InvalidArgumentError):
        fine_adjust_poses(SweepRecord(0), RigidTransform.identity(), RigidTransform.identity(), RigidTransform.identity())


def test_inplane_adjustment_aligns_centroids(calib):
    sweep = _sweep(0, [RigidTransform.identity()] * 3)
    shifted = inplane_adjust(sweep, (100.0, 120.0), (110.0, 120.0), calib, np.eye(3))
    for pose in shifted.poses:
        np.testing.assert_allclose(pose.translation, [0.0, -1.0, 0.0], atol=1e-12)


def test_inplane_adjustment_needs_both_centroids(calib):
    sweep = _sweep(0, [RigidTransform.identity()] * 2)
    assert inplane_adjust(sweep, None, (110.0, 120.0), calib, np.eye(3)) is sweep


# Sweeps and compounding


def test_sweep_directory_keeps_poses_and_masks(tmp_path: Path):
    mask_values = np.zeros((20, 30), dtype=bool)
    mask_values[5:9, 10:14] = True
    frames = (
        SweepFrame(0, 3, RigidTransform(rot_z(12.0), (1.0, 2.0, 3.0)), vessel_mask=Mask(mask_values)),
        SweepFrame(1, 4, RigidTransform.from_translation((0.0, 5.0, 0.0))),
    )
    loaded = SweepRecord.load(SweepRecord(2, frames).save(tmp_path / "sweep_02"), sweep_id=2)
    assert [f.waypoint for f in loaded.frames] == [3, 4]
    assert loaded.frames[0].centroid == (11.5, 6.5)
    assert loaded.frames[1].centroid is None
    np.testing.assert_array_equal(loaded.frames[0].vessel_mask.values, mask_values)
    assert loaded.frames[0].pose.is_close(frames[0].pose, atol=1e-12)


def test_centroid_compounding_maps_through_the_pose(calib):
    sweep = _sweep(0, [RigidTransform.from_translation((5.0, 0.0, 0.0))], centroid=(187.5, 100.0))
    volume = compound_sweeps([sweep], calib)
    np.testing.assert_allclose(volume.points, [[5.0, 0.0, 10.0]], atol=1e-12)
    assert volume.sweep_ids.tolist() == [0]


def test_contour_compounding_uses_the_mask_outline(calib):
    values = np.zeros(calib.image_shape, dtype=bool)
    values[100:105, 150:155] = True
    frame = SweepFrame(0, 0, RigidTransform.identity(), vessel_mask=Mask(values))
    volume = compound_sweeps([SweepRecord(0, (frame,))], calib, mode="contour")
    assert len(volume) == 16


def test_empty_sweeps_give_an_empty_volume(calib):
    volume = compound_sweeps([_sweep(0, [RigidTransform.identity()], centroid=None)], calib)
    assert len(volume) == 0
    assert np.isnan(vessel_rms_error(volume, [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))


def test_stitching_gap_between_sweeps(calib):
    before = _sweep(0, [RigidTransform.from_translation((i, 0.0, 0.0)) for i in range(3)])
    after = _sweep(1, [RigidTransform.from_translation((5.0 + i, 0.0, 0.0)) for i in range(3)])
    volume = compound_sweeps([before, after], calib)
    assert stitching_gap(volume, 0, 1) == pytest.approx(3.0)
    with pytest.raises(UndefinedGapError):
        stitching_gap(volume, 0, 2)


def test_polyline_distance_and_rms(calib):
    line = np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [20.0, 0.0, 0.0]])
    np.testing.assert_allclose(polyline_distance([[5.0, 3.0, 4.0], [25.0, 0.0, 0.0]], line), [5.0, 5.0])
    sweep = _sweep(0, [RigidTransform.from_translation((i, 0.0, -10.0)) for i in range(4)], centroid=(187.5, 100.0))
    assert vessel_rms_error(compound_sweeps([sweep], calib), line) == pytest.approx(0.0, abs=1e-12)
