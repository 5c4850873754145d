from __future__ import annotations

import numpy as np
import pytest

from app.services.confidence import (
    ConfidenceMap,
    UsImage,
    binarize_map,
    confidence_map,
    correction_angle,
    evaluate_correction,
    lookahead_weights,
    update_lookahead,
    weighted_barycenter,
)
from app.services.geom import rot_x
from app.services.planner import ScanWaypoint, Trajectory
from app.utils.errors import InvalidArgumentError, NoSignalError, UndefinedAngleError


def _uniform_map(shape: tuple[int, int] = (40, 30)) -> ConfidenceMap:
    return confidence_map(UsImage(np.full(shape, 0.5)), downsample=1)


def _shadowed_binary(calib, shadow_columns: int = 62, contact_rows: int = 11) -> np.ndarray:
    """Upper half confident, except a narrow shadow on the high-w side that only keeps the first rows."""
    height, width = calib.image_shape
    binary = np.zeros((height, width))
    binary[: height // 2] = 1.0
    binary[contact_rows:, width - shadow_columns :] = 0.0
    return binary


def _trajectory(n: int = 12, spacing: float = 5.0) -> Trajectory:
    return Trajectory(tuple(ScanWaypoint((i * spacing, 0.0, 0.0), np.eye(3)) for i in range(n)), spacing)


def _angle_between(a: np.ndarray, b: np.ndarray) -> float:
    cosine = (np.trace(a.T @ b) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0))))


# Confidence maps


def test_uniform_image_map_is_laterally_symmetric():
    values = _uniform_map().values
    np.testing.assert_allclose(values, values[:, ::-1], atol=1e-6)


def test_uniform_image_columns_fall_with_depth():
    values = _uniform_map().values
    assert np.all(np.diff(values, axis=0) <= 1e-9)
    assert np.all(values[0] == 1.0)
    assert np.all(values[-1] == 0.0)


def test_reflector_band_blocks_confidence():
    intensities = np.full((60, 40), 0.1)
    intensities[25:30] = 1.0
    values = confidence_map(UsImage(intensities), downsample=1).values
    assert values[31:].mean() < 0.3 * values[:25].mean()


def test_downsampled_map_keeps_the_image_shape():
    confidence = confidence_map(UsImage(np.full((55, 38), 0.4)), downsample=4)
    assert confidence.shape == (55, 38)


def test_confidence_parameters_must_be_positive():
    with pytest.raises(InvalidArgumentError):
        confidence_map(UsImage(np.full((10, 10), 0.5)), alpha=0.0)
    with pytest.raises(InvalidArgumentError):
        confidence_map(UsImage(np.full((10, 10), 0.5)), downsample=0)


def test_images_must_hold_unit_intensities():
    with pytest.raises(InvalidArgumentError):
        UsImage(np.full((4, 4), 1.5))


# Binarization and barycenter


def test_binarized_uniform_map_has_monotone_columns():
    binary = binarize_map(_uniform_map(), 0.5)
    assert binary[0].all()
    assert not binary[-1].any()
    assert np.all(np.diff(binary.astype(int), axis=0) <= 0)


def test_threshold_must_be_open_unit_interval():
    confidence = _uniform_map()
    for threshold in (0.0, 1.0):
        with pytest.raises(InvalidArgumentError):
            binarize_map(confidence, threshold)


def test_single_pixel_barycenter():
    grid = np.zeros((8, 6))
    grid[5, 2] = 1.0
    assert weighted_barycenter(grid) == (5.0, 2.0)


def test_uniform_grid_barycenter():
    assert weighted_barycenter(np.ones((9, 6))) == pytest.approx((4.0, 2.5))


def test_left_half_barycenter():
    grid = np.zeros((4, 10))
    grid[:, :5] = 1.0
    assert weighted_barycenter(grid)[1] == pytest.approx((10 / 2 - 1) / 2)


def test_empty_grid_has_no_signal():
    with pytest.raises(NoSignalError):
        weighted_barycenter(np.zeros((3, 3)))


# Correction angle


def test_centered_barycenter_needs_no_correction(calib):
    assert correction_angle((100.0, (calib.image_width_px - 1) / 2.0), calib) == 0.0


def test_lateral_center_is_the_middle_pixel_index(calib):
    uniform = weighted_barycenter(np.ones(calib.image_shape))
    assert uniform[1] == pytest.approx((calib.image_width_px - 1) / 2.0)
    assert correction_angle(uniform, calib) == pytest.approx(0.0, abs=1e-9)
    assert correction_angle((uniform[0], calib.image_width_px / 2.0), calib) < 0.0


def test_barycenter_on_transducer_row_is_undefined(calib):
    with pytest.raises(UndefinedAngleError):
        correction_angle((0.0, 100.0), calib)


def test_mirrored_barycenter_negates_angle(calib):
    angle = correction_angle((120.0, 100.0), calib)
    mirrored = correction_angle((120.0, calib.image_width_px - 1 - 100.0), calib)
    assert mirrored == -angle
    assert angle > 0.0


def test_one_sided_shadow_gives_a_moderate_correction(calib):
    result = evaluate_correction(ConfidenceMap(_shadowed_binary(calib)), calib)
    assert result.shadow_detected
    assert 5.0 < result.angle_deg < 15.0

    mirrored = evaluate_correction(ConfidenceMap(_shadowed_binary(calib)[:, ::-1]), calib)
    assert mirrored.angle_deg == pytest.approx(-result.angle_deg, abs=1e-9)


def test_full_contact_is_not_a_shadow(calib):
    height, width = calib.image_shape
    binary = np.zeros((height, width))
    binary[: height // 2] = 1.0
    result = evaluate_correction(ConfidenceMap(binary), calib)
    assert not result.shadow_detected
    assert result.angle_deg == pytest.approx(0.0, abs=1e-9)


# Lookahead update


def test_lookahead_weights_for_equal_distances():
    np.testing.assert_allclose(lookahead_weights([5.0, 5.0, 5.0, 5.0]), [0.25] * 4)


def test_lookahead_weights_favour_the_nearest_waypoint():
    np.testing.assert_allclose(lookahead_weights([5.0, 10.0, 15.0]), np.array([9.0, 4.0, 1.0]) / 14.0)


def test_lookahead_weights_always_sum_to_one(rng):
    for count in range(1, 11):
        for _ in range(100):
            weights = lookahead_weights(rng.uniform(0.5, 10.0, count))
            assert abs(weights.sum() - 1.0) < 1e-12
            assert np.all(weights > 0)


def test_lookahead_keeps_rotations_orthonormal(rng):
    trajectory = _trajectory(n=30)
    for _ in range(200):
        current = int(rng.integers(0, len(trajectory)))
        trajectory = update_lookahead(trajectory, current, rng.uniform(-30.0, 30.0), int(rng.integers(1, 11)))
    for waypoint in trajectory:
        np.testing.assert_allclose(waypoint.rotation @ waypoint.rotation.T, np.eye(3), atol=1e-9)
        assert np.linalg.det(waypoint.rotation) == pytest.approx(1.0, abs=1e-9)


def test_zero_angle_leaves_trajectory_unchanged():
    trajectory = _trajectory()
    updated = update_lookahead(trajectory, 3, 0.0, 5)
    for a, b in zip(updated, trajectory):
        np.testing.assert_allclose(a.rotation, b.rotation, atol=1e-12)


def test_single_lookahead_gets_the_full_correction():
    trajectory = _trajectory()
    updated = update_lookahead(trajectory, 3, 10.0, 1)
    expected = rot_x(-10.0)
    np.testing.assert_allclose(updated[3].rotation, expected, atol=1e-12)
    np.testing.assert_allclose(updated[4].rotation, expected, atol=1e-12)
    np.testing.assert_allclose(updated[5].rotation, np.eye(3), atol=1e-12)


def test_lookahead_spreads_the_correction_and_keeps_positions():
    trajectory = _trajectory()
    updated = update_lookahead(trajectory, 2, 14.0, 3)
    angles = [_angle_between(np.eye(3), updated[i].rotation) for i in range(2, 6)]
    np.testing.assert_allclose(angles, [14.0, 9.0, 4.0, 1.0], atol=1e-9)
    np.testing.assert_array_equal(updated.positions, trajectory.positions)


def test_lookahead_is_clamped_at_the_end():
    trajectory = _trajectory(n=6)
    updated = update_lookahead(trajectory, 4, 6.0, 5)
    np.testing.assert_allclose(updated[5].rotation, rot_x(-6.0), atol=1e-12)
    last = update_lookahead(trajectory, 5, 6.0, 5)
    np.testing.assert_allclose(last[5].rotation, rot_x(-6.0), atol=1e-12)
    np.testing.assert_allclose(last[4].rotation, np.eye(3), atol=1e-12)


def test_lookahead_rejects_bad_indices():
    with pytest.raises(InvalidArgumentError):
        update_lookahead(_trajectory(), 12, 1.0, 3)
    with pytest.raises(InvalidArgumentError):
        update_lookahead(_trajectory(), 0, 1.0, 0)
