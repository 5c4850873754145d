"""Shared fixtures: seeded RNG, default calibration, reduced phantoms and session configs."""

from __future__ import annotations

import numpy as np
import pytest

from app.schemas.phantom import PhantomParams, PlacementSpec
from app.schemas.session import SessionConfig
from app.services.monitor import CameraModel
from app.services.planner import CalibrationSet
from app.services.simworld import Phantom, gen_phantom


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture
def calib() -> CalibrationSet:
    return CalibrationSet.default()


@pytest.fixture
def camera() -> CameraModel:
    return CameraModel.from_spec(SessionConfig().calibration.camera)


@pytest.fixture
def short_params() -> PhantomParams:
    """A 160 mm tube: same cross-section as the default arm, quicker to sample."""
    return PhantomParams(length_mm=160.0)


@pytest.fixture
def tube(short_params: PhantomParams) -> Phantom:
    return gen_phantom(7, short_params)


@pytest.fixture
def flat_slab() -> Phantom:
    """Slab with a perfectly flat top and a straight vessel."""
    return gen_phantom(3, PhantomParams(shape="slab", length_mm=120.0, roughness_mm=0.0, vessel_wander_mm=0.0))


@pytest.fixture
def session_config(short_params: PhantomParams) -> SessionConfig:
    return SessionConfig(
        seed=11,
        phantom=short_params,
        placement=PlacementSpec(rotation_deg=10.0, translation=(15.0, -10.0, 0.0)),
    )

