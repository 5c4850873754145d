from __future__ import annotations

import numpy as np
import pytest

from app.schemas.motion import RandomMotionSpec
from app.schemas.phantom import PhantomParams
from app.services.geom import RigidTransform, rot_x
from app.services.planner import hand_eye_calibrate
from app.services.simworld import (
    Fiducial,
    MotionScript,
    ScriptedMotion,
    SimWorld,
    apply_motion_script,
    frame_seed,
    gen_phantom,
    penetration_depth,
    random_motion_script,
    render_bmode,
    simulate_contact_step,
)
from app.utils.errors import ContactLostError, InvalidArgumentError


def _pose_above(phantom, tilt_deg: float = 0.0, height: float = 10.0) -> RigidTransform:
    """Probe above the slab center looking down; the image plane crosses the vessel."""
    top = phantom.geometry.top_height
    return RigidTransform(rot_x(180.0 + tilt_deg), (0.0, 0.0, top + height))


# Phantom


def test_same_seed_same_phantom(short_params):
    a, b = gen_phantom(5, short_params), gen_phantom(5, short_params)
    np.testing.assert_array_equal(a.surface.points, b.surface.points)
    assert not np.array_equal(a.surface.points, gen_phantom(6, short_params).surface.points)


def test_vessel_must_fit_inside_the_arm():
    with pytest.raises(InvalidArgumentError):
        gen_phantom(0, PhantomParams(arm_radius_mm=15.0, vessel_depth_mm=14.0))
    with pytest.raises(InvalidArgumentError):
        gen_phantom(0, PhantomParams(vessel_depth_mm=6.0, roughness_mm=4.0))


def test_surface_normals_point_outward(tube):
    surface = tube.surface
    away_from_ends = np.abs(surface.points[:, 0]) < tube.geometry.half_length - 2.0
    np.testing.assert_allclose(np.linalg.norm(surface.normals, axis=1), 1.0, atol=1e-9)
    outside = surface.points + 1.0 * surface.normals
    inside = surface.points - 1.0 * surface.normals
    assert not tube.inside(outside).any()
    assert tube.inside(inside[away_from_ends]).all()


def test_centerline_runs_inside_the_phantom(tube):
    centerline = tube.centerline(1.0)
    assert tube.inside(centerline[1:-1]).all()
    np.testing.assert_allclose(tube.vessel_distance(centerline), 0.0, atol=1e-9)


def test_template_has_the_requested_size(tube):
    template = tube.template_cloud()
    assert abs(len(template) - 1379) <= 0.05 * 1379
    assert template.has_normals


def test_placement_moves_the_phantom(short_params):
    pose = RigidTransform.from_translation((30.0, 0.0, 0.0))
    moved = gen_phantom(7, short_params, pose)
    np.testing.assert_allclose(moved.surface.points, gen_phantom(7, short_params).surface.points + [30.0, 0.0, 0.0])


# Contact


def test_spring_law_penetration():
    assert penetration_depth(2.0, 250.0) == pytest.approx(8.0)
    with pytest.raises(InvalidArgumentError):
        penetration_depth(2.0, 1000.0)
    with pytest.raises(InvalidArgumentError):
        penetration_depth(-1.0, 250.0)


def test_contact_presses_the_probe_into_a_flat_top(flat_slab):
    target = _pose_above(flat_slab)
    pose = simulate_contact_step(target, flat_slab, force_n=2.0, stiffness_n_per_m=250.0)
    np.testing.assert_allclose(pose.translation, [0.0, 0.0, flat_slab.geometry.top_height - 8.0], atol=1e-6)
    np.testing.assert_allclose(pose.rotation, target.rotation, atol=1e-12)


def test_contact_is_lost_away_from_the_phantom(flat_slab):
    target = RigidTransform(rot_x(180.0), (1000.0, 0.0, 50.0))
    with pytest.raises(ContactLostError):
        simulate_contact_step(target, flat_slab)


# B-mode


def test_full_contact_frame_shows_the_vessel(flat_slab, calib):
    pose = simulate_contact_step(_pose_above(flat_slab), flat_slab)
    frame = render_bmode(flat_slab, pose, calib, seed=1)
    assert frame.lost_fraction == 0.0
    assert not frame.vessel_mask.is_empty
    assert frame.image.intensities.shape == calib.image_shape


def test_tilted_probe_loses_contact_on_one_side(flat_slab, calib):
    pose = simulate_contact_step(_pose_above(flat_slab, tilt_deg=35.0), flat_slab)
    frame = render_bmode(flat_slab, pose, calib, seed=1)
    assert 0.05 < frame.lost_fraction < 0.5
    lost = frame.contact_fraction < 0.5
    # only one edge of the transducer lifts off
    assert lost[0] != lost[-1]


def test_bmode_is_seeded(flat_slab, calib):
    pose = simulate_contact_step(_pose_above(flat_slab), flat_slab)
    a = render_bmode(flat_slab, pose, calib, seed=4).image.intensities
    b = render_bmode(flat_slab, pose, calib, seed=4).image.intensities
    np.testing.assert_array_equal(a, b)


def test_bmode_needs_the_probe_near_the_skin(flat_slab, calib):
    with pytest.raises(InvalidArgumentError):
        render_bmode(flat_slab, _pose_above(flat_slab, height=45.0), calib)


# Motion and fiducial


def test_motion_bounds_are_enforced():
    with pytest.raises(InvalidArgumentError):
        ScriptedMotion(0, (0.0, 0.0))
    with pytest.raises(InvalidArgumentError):
        ScriptedMotion(1, (150.0, 0.0))
    with pytest.raises(InvalidArgumentError):
        ScriptedMotion(1, (0.0, 0.0), 90.0)
    with pytest.raises(InvalidArgumentError):
        MotionScript((ScriptedMotion(5, (1.0, 0.0)), ScriptedMotion(5, (2.0, 0.0))))


def test_random_motions_stay_in_the_rectangle():
    spec = RandomMotionSpec(count=20, max_rotation_deg=80.0, first_trigger=1, spacing=1)
    script = random_motion_script(spec, seed=9)
    assert len(script) == 20
    for motion in script.motions:
        assert abs(motion.translation_mm[0]) <= 55.0
        assert abs(motion.translation_mm[1]) <= 70.0
        assert abs(motion.rotation_deg) <= 80.0
    assert random_motion_script(spec, seed=9) == script


def test_motion_moves_phantom_and_fiducial_together(tube):
    fiducial = Fiducial((260.0, 90.0, 0.0))
    script = MotionScript((ScriptedMotion(3, (20.0, -10.0), 30.0),))
    assert apply_motion_script(tube, fiducial, script, 2).transform is None

    applied = apply_motion_script(tube, fiducial, script, 3)
    np.testing.assert_allclose(applied.fiducial.position, applied.transform.apply(fiducial.position))
    np.testing.assert_allclose(applied.phantom.surface.points, applied.transform.apply(tube.surface.points), atol=1e-9)
    np.testing.assert_allclose(applied.phantom.centroid, tube.centroid + [20.0, -10.0, 0.0], atol=1e-9)


def test_fiducial_noise_is_seeded():
    fiducial = Fiducial((1.0, 2.0, 3.0), noise_mm=0.5)
    np.testing.assert_array_equal(fiducial.observe(3), fiducial.observe(3))
    assert not np.array_equal(fiducial.observe(3), fiducial.observe(4))
    np.testing.assert_array_equal(Fiducial((1.0, 2.0, 3.0)).observe(3), [1.0, 2.0, 3.0])


def test_frame_seeds_differ_per_stream():
    assert frame_seed(1, 2, 1) == frame_seed(1, 2, 1)
    assert frame_seed(1, 2, 1) != frame_seed(1, 2, 2)
    assert frame_seed(1, 2, 1) != frame_seed(1, 3, 1)


# World


def test_camera_view_is_deterministic(session_config, calib, camera):
    world = SimWorld.from_config(session_config, calib, camera)
    a, b = world.camera_view(0), world.camera_view(0)
    assert a.depth_m.shape == camera.shape
    assert a.mask.area > 0
    assert len(a.visible) > 0
    np.testing.assert_array_equal(a.depth_m, b.depth_m)
    np.testing.assert_array_equal(a.mask.values, b.mask.values)


def test_occluder_hides_part_of_the_limb(session_config, calib, camera):
    world = SimWorld.from_config(session_config, calib, camera)
    clear, occluded = world.camera_view(0, 0.0), world.camera_view(0, 0.3)
    assert occluded.mask.area < clear.mask.area
    assert len(occluded.visible) < len(clear.visible)


def test_contact_step_reports_the_flange_pose(session_config, calib, camera):
    world = SimWorld.from_config(session_config, calib, camera)
    centroid = world.phantom.centroid
    target = RigidTransform(rot_x(180.0), (centroid[0], centroid[1], world.phantom.geometry.top_height + 5.0))
    flange = world.contact_step(target)
    probe = calib.probe_pose_from_flange(flange)
    np.testing.assert_allclose(probe.rotation, target.rotation, atol=1e-12)
    assert probe.translation[2] < target.translation[2]


def test_hand_eye_pairs_recover_the_camera_pose(session_config, calib, camera):
    world = SimWorld.from_config(session_config, calib, camera)
    result = hand_eye_calibrate(world.hand_eye_pairs())
    assert result.residual_rms_mm < 1.0
    assert result.transform.distance_to(camera.pose) < 1.0
