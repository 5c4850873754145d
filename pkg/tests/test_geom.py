from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from app.schemas.common import TransformSpec
from app.services.geom import (
    PointCloud,
    RigidTransform,
    cloud_mse,
    compose_all,
    crop_along_principal_axis,
    estimate_normals,
    knn_search,
    poisson_disc_sample,
    poisson_disc_sample_count,
    principal_axes,
    read_ply,
    read_ply_table,
    rot_z,
    transform_from_spec,
    write_ply,
)
from app.utils.errors import DegenerateInputError, InvalidArgumentError


def _grid(n: int = 10, spacing: float = 1.0) -> np.ndarray:
    xs, ys = np.meshgrid(np.arange(n) * spacing, np.arange(n) * spacing)
    return np.column_stack([xs.ravel(), ys.ravel(), np.zeros(n * n)])


def _fibonacci_sphere(n: int, radius: float) -> np.ndarray:
    i = np.arange(n) + 0.5
    polar = np.arccos(1.0 - 2.0 * i / n)
    azimuth = np.pi * (1.0 + 5.0**0.5) * i
    return radius * np.column_stack(
        [np.cos(azimuth) * np.sin(polar), np.sin(azimuth) * np.sin(polar), np.cos(polar)]
    )


# Transforms


def test_compose_identity_is_identity():
    identity = RigidTransform.identity()
    assert (identity @ identity).is_close(identity, atol=0.0)


def test_quarter_turn_plus_shift():
    transform = RigidTransform(rot_z(90.0), (1.0, 0.0, 0.0))
    np.testing.assert_allclose(transform.apply([1.0, 0.0, 0.0]), [1.0, 1.0, 0.0], atol=1e-12)


def test_inverse_round_trip(rng):
    for _ in range(100):
        transform = RigidTransform.random(rng)
        point = rng.uniform(-500.0, 500.0, 3)
        np.testing.assert_allclose(transform.inverse().apply(transform.apply(point)), point, atol=1e-9)
        assert (transform.inverse() @ transform).is_close(RigidTransform.identity(), atol=1e-9)


def test_composition_is_associative(rng):
    a, b, c = (RigidTransform.random(rng) for _ in range(3))
    assert ((a @ b) @ c).is_close(a @ (b @ c), atol=1e-9)


def test_long_composition_chain_stays_orthonormal(rng):
    chain = compose_all(RigidTransform.random(rng, 1.0) for _ in range(1000))
    drift = np.max(np.abs(chain.rotation.T @ chain.rotation - np.eye(3)))
    assert drift < 1e-6
    assert np.linalg.det(chain.rotation) == pytest.approx(1.0, abs=1e-9)


def test_invalid_rotations_are_rejected():
    with pytest.raises(InvalidArgumentError):
        RigidTransform(np.diag([1.0, 1.0, 2.0]), np.zeros(3))
    with pytest.raises(InvalidArgumentError):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(InvalidArgumentError):
        RigidTransform(np.eye(3), (np.nan, 0.0, 0.0))


def test_transform_spec_accepts_rounded_rotation():
    spec = TransformSpec(rotation=[[0.70711, -0.70711, 0.0], [0.70711, 0.70711, 0.0], [0.0, 0.0, 1.0]])
    transform = transform_from_spec(spec)
    assert transform.rotation_angle_deg() == pytest.approx(45.0, abs=1e-3)


def test_quaternion_round_trip_keeps_pose(rng):
    transform = RigidTransform.random(rng)
    rebuilt = RigidTransform.from_quaternion(transform.as_quaternion(), transform.translation)
    assert rebuilt.is_close(transform, atol=1e-12)


# Point clouds


def test_normals_must_be_unit_and_match_points():
    with pytest.raises(InvalidArgumentError):
        PointCloud(np.zeros((2, 3)), np.array([[0.0, 0.0, 2.0], [0.0, 0.0, 1.0]]))
    with pytest.raises(InvalidArgumentError):
        PointCloud(np.zeros((2, 3)), np.array([[0.0, 0.0, 1.0]]))


def test_knn_nearest_by_inspection():
    cloud = PointCloud(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
    assert knn_search(cloud, (0.1, 0.0, 0.0), 1) == [0]


def test_knn_ties_go_to_lower_index():
    cloud = PointCloud(np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [5.0, 0.0, 0.0]]))
    assert knn_search(cloud, (0.0, 0.0, 0.0), 3) == [0, 1, 2]


def test_knn_matches_exhaustive_sort(rng):
    cloud = PointCloud(rng.uniform(-50.0, 50.0, (200, 3)))
    for _ in range(20):
        query = rng.uniform(-60.0, 60.0, 3)
        distances = np.sum((cloud.points - query) ** 2, axis=1)
        expected = np.lexsort((np.arange(len(cloud)), distances))[:5]
        assert knn_search(cloud, query, 5) == expected.tolist()


def test_knn_rejects_bad_k():
    cloud = PointCloud(np.zeros((3, 3)) + np.arange(3)[:, None])
    with pytest.raises(InvalidArgumentError):
        knn_search(cloud, (0.0, 0.0, 0.0), 4)
    with pytest.raises(InvalidArgumentError):
        knn_search(PointCloud(np.zeros((0, 3))), (0.0, 0.0, 0.0), 1)


def test_plane_normals_point_up():
    estimation = estimate_normals(PointCloud(_grid()), k=10, viewpoint=(4.5, 4.5, 100.0))
    assert not estimation.degenerate.any()
    np.testing.assert_allclose(estimation.normals, np.tile([0.0, 0.0, 1.0], (100, 1)), atol=1e-9)


def test_sphere_normals_face_the_center_viewpoint():
    points = _fibonacci_sphere(2000, 100.0)
    estimation = estimate_normals(PointCloud(points), k=10, viewpoint=(0.0, 0.0, 0.0))
    inward = -points / np.linalg.norm(points, axis=1, keepdims=True)
    angles = np.degrees(np.arccos(np.clip(np.sum(estimation.normals * inward, axis=1), -1.0, 1.0)))
    assert angles.max() < 5.0


def test_collinear_neighbourhood_is_flagged():
    cloud = PointCloud(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]))
    estimation = estimate_normals(cloud, k=3)
    assert estimation.degenerate.all()
    assert len(estimation.to_cloud()) == 0


def test_principal_axes_of_a_segment():
    points = np.column_stack([np.linspace(0.0, 100.0, 50), np.zeros(50), np.zeros(50)])
    axes = principal_axes(PointCloud(points))
    np.testing.assert_allclose(np.abs(axes.first), [1.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(axes.eigenvalues[1:], 0.0, atol=1e-12)


def test_principal_axes_of_isotropic_sample(rng):
    axes = principal_axes(PointCloud(rng.normal(0.0, 10.0, (10_000, 3))))
    assert axes.eigenvalues[0] / axes.eigenvalues[2] < 1.2
    np.testing.assert_allclose(axes.axes @ axes.axes.T, np.eye(3), atol=1e-9)


def test_principal_axes_follow_rigid_motion(rng):
    cloud = PointCloud(rng.normal(0.0, 1.0, (500, 3)) * [40.0, 10.0, 3.0])
    transform = RigidTransform.random(rng)
    before = principal_axes(cloud)
    after = principal_axes(cloud.transformed(transform))
    np.testing.assert_allclose(after.eigenvalues, before.eigenvalues, rtol=1e-9)
    for axis_before, axis_after in zip(before.axes, after.axes):
        assert abs(np.dot(transform.rotate(axis_before), axis_after)) == pytest.approx(1.0, abs=1e-9)


def test_principal_axes_reject_identical_points():
    with pytest.raises(DegenerateInputError):
        principal_axes(PointCloud(np.ones((5, 3))))


def test_tube_first_axis_follows_the_arm(tube):
    axes = principal_axes(tube.surface)
    assert np.degrees(np.arccos(abs(axes.first[0]))) < 5.0


# Sampling and metrics


def test_poisson_radius_larger_than_cloud_gives_one_point():
    cloud = PointCloud(_grid())
    assert len(poisson_disc_sample(cloud, cloud.diameter + 1.0)) == 1


def test_poisson_grid_min_distance_and_maximality():
    cloud = PointCloud(_grid())
    sample = poisson_disc_sample(cloud, 2.5, seed=3)
    pairwise = np.linalg.norm(sample.points[:, None] - sample.points[None, :], axis=2)
    np.fill_diagonal(pairwise, np.inf)
    assert pairwise.min() >= 2.5
    to_sample = np.linalg.norm(cloud.points[:, None] - sample.points[None, :], axis=2).min(axis=1)
    assert to_sample.max() < 2.5


def test_poisson_empty_input_gives_empty_output():
    assert len(poisson_disc_sample(PointCloud(np.zeros((0, 3))), 1.0)) == 0
    with pytest.raises(InvalidArgumentError):
        poisson_disc_sample(PointCloud(_grid()), 0.0)


def test_poisson_count_targets_template_size(rng):
    cloud = PointCloud(np.column_stack([rng.uniform(0.0, 200.0, (8000, 2)), np.zeros(8000)]))
    sample = poisson_disc_sample_count(cloud, 1379, seed=1)
    assert abs(len(sample) - 1379) <= 0.05 * 1379


def test_cloud_mse_is_rms_distance():
    cloud = PointCloud(_grid())
    identity = np.arange(len(cloud))
    assert cloud_mse(cloud, cloud, identity) == 0.0
    shifted = cloud.transformed(RigidTransform.from_translation((3.0, 0.0, 0.0)))
    assert cloud_mse(cloud, shifted, identity) == pytest.approx(3.0)
    with pytest.raises(InvalidArgumentError):
        cloud_mse(cloud, cloud, [])


def test_crop_along_principal_axis_keeps_requested_slice():
    points = np.column_stack([np.arange(100.0), np.zeros(100), np.zeros(100)])
    cropped = crop_along_principal_axis(PointCloud(points), 0.1, 1.0)
    assert len(cropped) == 90
    assert cropped.points[:, 0].min() == 10.0
    with pytest.raises(InvalidArgumentError):
        crop_along_principal_axis(PointCloud(points), 0.5, 0.5)


def test_ply_keeps_points_normals_and_labels(tmp_path: Path):
    normals = np.tile([0.0, 0.0, 1.0], (100, 1))
    cloud = PointCloud(_grid() + 0.123456789, normals)
    path = write_ply(tmp_path / "cloud.ply", cloud, {"sweep": np.arange(100) % 3})
    loaded = read_ply(path)
    np.testing.assert_array_equal(loaded.points, cloud.points)
    np.testing.assert_array_equal(loaded.normals, normals)
    np.testing.assert_array_equal(read_ply_table(path)["sweep"], np.arange(100) % 3)
