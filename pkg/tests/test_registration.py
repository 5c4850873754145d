from __future__ import annotations

import numpy as np
import pytest

from app.services.geom import PointCloud, RigidTransform, rot_z
from app.services.registration import (
    IcpParams,
    coarse_align,
    icp_refine,
    multiscale_descriptors,
    register_clouds,
)
from app.services.session.experiments import crop_robustness, registration_convergence
from app.utils.errors import InvalidArgumentError, RegistrationFailedError


def _sphere(n: int = 1500, radius: float = 50.0) -> PointCloud:
    i = np.arange(n) + 0.5
    polar = np.arccos(1.0 - 2.0 * i / n)
    azimuth = np.pi * (1.0 + 5.0**0.5) * i
    normals = np.column_stack([np.cos(azimuth) * np.sin(polar), np.sin(azimuth) * np.sin(polar), np.cos(polar)])
    return PointCloud(radius * normals, normals)


def _assert_non_increasing(history: list[float]) -> None:
    assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))


@pytest.fixture
def template(tube):
    return tube.template_cloud(900)


def test_descriptors_need_normals(template):
    with pytest.raises(InvalidArgumentError):
        multiscale_descriptors(template.without_normals())


def test_descriptors_use_default_scales(template):
    descriptors = multiscale_descriptors(template)
    assert descriptors.scales == (0.5, 1.0, 1.5)
    assert descriptors.histograms.shape == (3, len(template), 33)
    assert np.all(np.isfinite(descriptors.histograms))
    assert np.all(descriptors.histograms >= 0.0)


def test_sphere_has_almost_no_persistent_features():
    descriptors = multiscale_descriptors(_sphere())
    assert descriptors.persistent.mean() < 0.05


def test_coarse_self_alignment_is_identity(template):
    transform = coarse_align(template, template)
    assert transform.is_close(RigidTransform.identity(), atol=1e-6)


def test_icp_on_identical_clouds(template):
    result = icp_refine(template, template)
    assert result.transform.is_close(RigidTransform.identity(), atol=1e-9)
    assert result.final_mse == pytest.approx(0.0, abs=1e-9)
    assert result.converged
    assert result.iterations <= 2


def test_icp_recovers_a_small_offset(template):
    offset = RigidTransform.about_point(rot_z(5.0), template.centroid, (6.0, -4.0, 3.0))
    result = icp_refine(template.transformed(offset), template)
    _assert_non_increasing(result.mse_history)
    error = result.transform @ offset
    assert error.rotation_angle_deg() < 0.1
    assert np.linalg.norm(error.translation) < 0.1


def test_icp_is_equivariant(template, rng):
    offset = RigidTransform.about_point(rot_z(4.0), template.centroid, (3.0, 2.0, 0.0))
    source = template.transformed(offset)
    frame = RigidTransform.random(rng)
    direct = icp_refine(source, template)
    moved = icp_refine(source.transformed(frame), template.transformed(frame))
    assert moved.transform.is_close(frame @ direct.transform @ frame.inverse(), atol=1e-6)


def test_icp_fails_when_every_pair_is_rejected(template):
    far = template.transformed(RigidTransform.from_translation((1000.0, 0.0, 0.0)))
    with pytest.raises(RegistrationFailedError) as excinfo:
        icp_refine(far, template, params=IcpParams(rejection_distance=1.0))
    assert excinfo.value.mse_history == []


def test_register_clouds_recovers_a_large_rotation(template):
    offset = RigidTransform.about_point(rot_z(40.0), template.centroid, (100.0, 0.0, 0.0))
    result = register_clouds(template.transformed(offset), template)
    error = result.transform @ offset
    assert error.rotation_angle_deg() < 1.0
    assert np.linalg.norm(error.translation) < 2.0


@pytest.mark.slow
def test_visible_part_converges_from_random_offsets(session_config):
    rows, history = registration_convergence(session_config, trials=3)
    for row in rows:
        assert row["offset_mm"] <= 30.0
        assert row["offset_deg"] <= 20.0 + 1e-9
        assert row["final_mse_mm"] < 0.5
    for trial in range(3):
        _assert_non_increasing([h["mse_mm"] for h in history if h["trial"] == trial])


@pytest.mark.slow
def test_cropped_clouds_still_register(session_config):
    rows = crop_robustness(session_config)
    assert [(r["lower_fraction"], r["upper_fraction"]) for r in rows] == [
        (0.1, 1.0),
        (0.2, 1.0),
        (0.4, 1.0),
        (0.1, 0.9),
    ]
    for row in rows:
        assert row["iterations"] <= 200
        assert row["final_mse_mm"] <= 5.0
