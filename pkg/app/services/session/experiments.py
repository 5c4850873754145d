"""Experiment drivers: registration convergence, crop robustness, compensation error and the control run.

Each experiment writes a CSV into the experiments directory. Wall times are
logged, never written, so the tables are reproducible.
"""

from __future__ import annotations

import time
from pathlib import Path
from typing import Any

import numpy as np

from app.schemas.motion import MotionEventSpec, MotionScriptSpec, RandomMotionSpec
from app.schemas.session import SessionConfig
from app.services.compensate import evaluate_emc, register_motion
from app.services.geom import PointCloud, RigidTransform, crop_along_principal_axis, poisson_disc_sample_count
from app.services.monitor import CameraModel
from app.services.planner import calibration_from_file
from app.services.registration import register_clouds
from app.services.session.artifacts import ArtifactStore
from app.services.session.planning import camera_cloud
from app.services.simworld import SimWorld, random_motion_script
from app.utils.constants import CAMERA_POINT_COUNT, MAX_MOTION_ROTATION_DEG
from app.utils.errors import ScanPilotError
from app.utils.logger import get_logger

logger = get_logger("session.experiments")

CROPS = ((0.1, 1.0), (0.2, 1.0), (0.4, 1.0), (0.1, 0.9))
MAX_OFFSET_MM = 30.0
MAX_OFFSET_DEG = 20.0
VISIBLE_MIN_NORMAL_Z = 0.3
EMC_TRIALS = 20
OCCLUDED_FRACTION = 0.2
CONTROL_MOTION = MotionEventSpec(trigger_waypoint=40, translation_mm=(0.0, 15.0))


def _world(config: SessionConfig) -> SimWorld:
    return SimWorld.from_config(
        config, calibration_from_file(config.calibration), CameraModel.from_spec(config.calibration.camera)
    )


def visible_template(config: SessionConfig) -> tuple[PointCloud, PointCloud]:
    """Template (≈1379 points) and the camera-facing part of it resampled to ≈925 points."""
    phantom = _world(config).phantom
    template = phantom.template_cloud(config.sampling.template_points)
    upper = template.subset(np.flatnonzero(template.normals[:, 2] > VISIBLE_MIN_NORMAL_Z))
    return template, poisson_disc_sample_count(upper, CAMERA_POINT_COUNT, seed=config.seed)


def random_offset(rng: np.random.Generator, pivot: np.ndarray) -> RigidTransform:
    """Rotation of at most 20 deg about ``pivot`` plus a translation of at most 30 mm."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = np.deg2rad(rng.uniform(0.0, MAX_OFFSET_DEG))
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    rotation = RigidTransform.from_rotvec(axis * angle).rotation
    return RigidTransform.about_point(rotation, pivot, direction * rng.uniform(0.0, MAX_OFFSET_MM))


def registration_convergence(config: SessionConfig, trials: int = 5) -> tuple[list[dict], list[dict]]:
    """Register offset copies of the visible template back onto the template."""
    template, visible = visible_template(config)
    rng = np.random.default_rng(config.seed)
    rows, history = [], []
    for trial in range(trials):
        offset = random_offset(rng, visible.centroid)
        start = time.perf_counter()
        result = register_clouds(visible.transformed(offset), template)
        logger.info(f"Convergence trial {trial}: {time.perf_counter() - start:.3f}s")
        below = [i for i, value in enumerate(result.mse_history) if value < 0.5]
        rows.append(
            {
                "trial": trial,
                "source_points": len(visible),
                "target_points": len(template),
                "offset_mm": float(np.linalg.norm(offset.translation)),
                "offset_deg": offset.rotation_angle_deg(),
                "iterations": result.iterations,
                "final_mse_mm": result.final_mse,
                "converged": result.converged,
                "first_iteration_below_0_5_mm": below[0] if below else "",
            }
        )
        history += [{"trial": trial, **record} for record in result.to_records()]
    return rows, history


def crop_robustness(config: SessionConfig) -> list[dict]:
    """Register cropped visible clouds; the crop removes slices across the arm's long axis."""
    template, visible = visible_template(config)
    offset = random_offset(np.random.default_rng(config.seed + 1), visible.centroid)
    rows = []
    for lower, upper in CROPS:
        cropped = crop_along_principal_axis(visible, lower, upper)
        result = register_clouds(cropped.transformed(offset), template)
        rows.append(
            {
                "lower_fraction": lower,
                "upper_fraction": upper,
                "points": len(cropped),
                "iterations": result.iterations,
                "final_mse_mm": result.final_mse,
                "converged": result.converged,
            }
        )
    return rows


def compensation_error(config: SessionConfig, trials: int = EMC_TRIALS) -> tuple[list[dict], list[dict]]:
    """Seeded phantom motions; e_mc of the recovered motion with and without an occluder."""
    motion_spec = RandomMotionSpec(count=1, first_trigger=1, max_rotation_deg=MAX_MOTION_ROTATION_DEG)
    rows = []
    for trial in range(trials):
        seed = config.seed + trial
        script = random_motion_script(motion_spec, seed)
        for occluder in (0.0, OCCLUDED_FRACTION):
            trial_config = config.model_copy(update={"seed": seed})
            world = _world(trial_config)
            row: dict[str, Any] = {
                "trial": trial,
                "occluder_fraction": occluder,
                "true_translation_mm": "",
                "true_rotation_deg": "",
                "recovered_rotation_deg": "",
                "final_mse_mm": "",
                "e_mc_mm": "",
                "accepted": False,
                "error": "",
            }
            try:
                before = camera_cloud(world.camera_view(0, occluder), world.camera, trial_config, 0)
                marker_before = world.observe_fiducial(0)
                applied = world.apply_motion(script, script.motions[0].trigger)
                after = camera_cloud(world.camera_view(1, occluder), world.camera, trial_config, 1)
                start = time.perf_counter()
                registration = register_motion(before, after)
                elapsed = time.perf_counter() - start
                result = evaluate_emc(marker_before, world.observe_fiducial(1), registration.transform)
            except ScanPilotError as e:
                logger.warning(f"Compensation trial {trial} (occluder {occluder}) failed: {e.code}")
                rows.append({**row, "error": e.code})
                continue
            logger.debug(f"register_motion took {elapsed:.3f}s")
            rows.append(
                {
                    **row,
                    "true_translation_mm": float(np.linalg.norm(applied.transform.translation)),
                    "true_rotation_deg": applied.transform.rotation_angle_deg(),
                    "recovered_rotation_deg": registration.transform.rotation_angle_deg(),
                    "final_mse_mm": registration.final_mse,
                    "e_mc_mm": result.e_mc,
                    "accepted": result.accepted,
                }
            )

    summary = []
    for occluder in (0.0, OCCLUDED_FRACTION):
        values = np.array([r["e_mc_mm"] for r in rows if r["occluder_fraction"] == occluder and r["e_mc_mm"] != ""])
        summary.append(
            {
                "occluder_fraction": occluder,
                "trials": len(values),
                "mean_e_mc_mm": float(values.mean()) if len(values) else "",
                "std_e_mc_mm": float(values.std()) if len(values) else "",
            }
        )
    return rows, summary


def control_run(config: SessionConfig, directory: Path) -> list[dict]:
    """Full sessions with and without compensation for the same mid-scan motion."""
    from app.services.session.runner import ScanSession

    motion = config.motion if config.motion.events or config.motion.random else MotionScriptSpec(events=[CONTROL_MOTION])
    rows = []
    for compensate in (True, False):
        toggles = config.toggles.model_copy(update={"compensate": compensate})
        run_config = config.model_copy(update={"motion": motion, "toggles": toggles})
        name = "compensated" if compensate else "control"
        report = ScanSession(run_config, directory / name, persist_frames=False).run(("all",))
        compound = report.compound if report is not None else None
        gaps = [g for g in compound.stitching_gaps_mm if g is not None] if compound is not None else []
        rows.append(
            {
                "run": name,
                "status": report.status if report is not None else "failed",
                "sweeps": report.scan.sweeps if report is not None and report.scan is not None else 0,
                "max_stitching_gap_mm": max(gaps) if gaps else "",
                "vessel_rms_mm": compound.vessel_rms_mm if compound is not None else "",
            }
        )
    return rows


def run_experiments(config: SessionConfig, directory: str | Path) -> dict[str, Path]:
    directory = Path(directory)
    store = ArtifactStore(directory)
    convergence, history = registration_convergence(config)
    emc, emc_summary = compensation_error(config)
    written = {
        "convergence": store.write_rows("convergence.csv", convergence),
        "convergence_history": store.write_rows("convergence_history.csv", history),
        "crop": store.write_rows("crop.csv", crop_robustness(config)),
        "emc": store.write_rows("emc.csv", emc),
        "emc_summary": store.write_rows("emc_summary.csv", emc_summary),
        "control": store.write_rows("control.csv", control_run(config, directory)),
    }
    logger.info(f"Experiments written to {directory}")
    return written
