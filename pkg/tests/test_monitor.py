from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from app.services.geom import RigidTransform
from app.services.monitor import (
    CameraModel,
    Mask,
    MotionDetector,
    detect_motion,
    dice_coefficient,
    fit_plane,
    mask_to_cloud,
)
from app.utils.errors import EmptyCloudError, InvalidArgumentError, UndefinedDiceError


def _strip(start: int, stop: int, shape: tuple[int, int] = (4, 12)) -> Mask:
    values = np.zeros(shape, dtype=bool)
    values[:, start:stop] = True
    return Mask(values)


def _small_camera() -> CameraModel:
    return CameraModel(fx=500.0, fy=500.0, cx=20.0, cy=15.0, width=41, height=31, pose=RigidTransform.identity())


# Dice


def test_dice_of_identical_masks():
    assert dice_coefficient(_strip(2, 6), _strip(2, 6)) == 1.0


def test_dice_of_disjoint_masks():
    assert dice_coefficient(_strip(0, 4), _strip(6, 10)) == 0.0


def test_dice_of_half_overlap():
    assert dice_coefficient(_strip(0, 4), _strip(2, 6)) == 0.5


def test_dice_of_two_empty_masks_is_undefined():
    with pytest.raises(UndefinedDiceError):
        dice_coefficient(Mask.empty((3, 3)), Mask.empty((3, 3)))


def test_dice_needs_matching_shapes():
    with pytest.raises(InvalidArgumentError):
        dice_coefficient(_strip(0, 4), _strip(0, 4, shape=(5, 12)))


def test_masks_must_be_binary():
    with pytest.raises(InvalidArgumentError):
        Mask(np.full((2, 2), 2))


def test_mask_survives_pgm(tmp_path: Path):
    mask = _strip(3, 7)
    loaded = Mask.load(mask.save(tmp_path / "mask.pgm"))
    np.testing.assert_array_equal(loaded.values, mask.values)


# Motion detection


def test_static_stream_has_no_events():
    assert detect_motion([_strip(2, 6)] * 10) == [None] * 10


def test_long_static_stream_never_triggers():
    stream = [_strip(2, 6)] * 10_000
    assert not any(detect_motion(stream))
    assert not any(detect_motion(stream, mode="sliding", lag=3))


def test_shift_below_threshold_raises_one_event():
    stream = [_strip(0, 4)] * 3 + [_strip(2, 6)] * 3
    events = detect_motion(stream, threshold=0.95)
    flagged = [e for e in events if e is not None]
    assert len(flagged) == 1
    assert flagged[0].frame == 3
    assert flagged[0].dice == 0.5
    assert flagged[0].reference_frame == 0


def test_sliding_mode_compares_with_lagged_frame():
    stream = [_strip(0, 4), _strip(0, 4), _strip(2, 6), _strip(2, 6)]
    events = detect_motion(stream, mode="sliding", lag=2, reset_after_event=False)
    assert events[2] is not None and events[2].reference_frame == 0
    assert events[3] is None


def test_detector_stays_latched_until_reset():
    detector = MotionDetector()
    detector.observe(_strip(0, 4))
    assert detector.observe(_strip(6, 10)) is not None
    assert detector.observe(_strip(0, 4)) is None
    detector.reset(_strip(6, 10))
    assert detector.observe(_strip(6, 10)) is None
    assert detector.observe(_strip(0, 4)) is not None


def test_empty_comparison_counts_as_motion():
    events = detect_motion([Mask.empty((4, 12)), Mask.empty((4, 12))])
    assert events[1] is not None and events[1].dice == 0.0


def test_detector_rejects_bad_settings():
    with pytest.raises(InvalidArgumentError):
        MotionDetector(threshold=1.0)
    with pytest.raises(InvalidArgumentError):
        MotionDetector(mode="sliding", lag=0)


# Cloud extraction


def test_single_pixel_back_projects_onto_the_axis():
    camera = _small_camera()
    values = np.zeros(camera.shape, dtype=bool)
    values[15, 20] = True
    depth = np.zeros(camera.shape)
    depth[15, 20] = 1.0
    cloud = mask_to_cloud(Mask(values), depth, camera)
    np.testing.assert_allclose(cloud.points, [[0.0, 0.0, 1000.0]], atol=1e-9)


def test_table_plane_is_removed():
    camera = _small_camera()
    depth = np.full(camera.shape, 1.0)
    values = np.zeros(camera.shape, dtype=bool)
    values[10:20, 12:28] = True
    depth[values] = 0.9
    cloud = mask_to_cloud(Mask(values), depth, camera)
    assert len(cloud) == int(values.sum())
    np.testing.assert_allclose(cloud.points[:, 2], 900.0)


def test_height_cut_can_empty_the_cloud():
    camera = _small_camera()
    depth = np.full(camera.shape, 1.0)
    values = np.zeros(camera.shape, dtype=bool)
    values[10:20, 12:28] = True
    depth[values] = 0.9
    with pytest.raises(EmptyCloudError):
        mask_to_cloud(Mask(values), depth, camera, z_cut_mm=850.0)


def test_empty_mask_gives_no_cloud():
    camera = _small_camera()
    with pytest.raises(EmptyCloudError):
        mask_to_cloud(Mask.empty(camera.shape), np.ones(camera.shape), camera)


def test_depth_must_match_the_mask():
    camera = _small_camera()
    with pytest.raises(InvalidArgumentError):
        mask_to_cloud(Mask.empty(camera.shape), np.ones((3, 3)), camera)


def test_plane_fit_reports_failure_on_scattered_points(rng):
    assert fit_plane(rng.uniform(-500.0, 500.0, (200, 3)), tolerance_mm=1.0) is None


def test_plane_fit_finds_the_table(rng):
    table = np.column_stack([rng.uniform(-100.0, 100.0, (300, 2)), np.zeros(300)])
    clutter = rng.uniform(20.0, 80.0, (50, 3))
    plane = fit_plane(np.vstack([table, clutter]), tolerance_mm=1.0)
    assert plane is not None
    assert abs(plane.normal[2]) == pytest.approx(1.0, abs=1e-9)
    assert plane.inlier_fraction == pytest.approx(300 / 350)
