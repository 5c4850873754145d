from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

import main
from app.schemas.motion import MotionEventSpec, MotionScriptSpec
from app.schemas.session import NoiseSpec, SessionConfig
from app.services.geom import RigidTransform, rot_x
from app.services.planner import ScanWaypoint, Trajectory
from app.services.session import ScanRunner, ScanSession, flatten_metrics, load_session_config, plan_scan
from app.services.session import artifacts as files
from app.services.session import planning
from app.services.session.experiments import OCCLUDED_FRACTION, compensation_error, control_run
from app.services.simworld import MotionScript, SimWorld
from app.utils.constants import EXIT_ERROR, EXIT_GATE_ABORT, EXIT_OK
from app.utils.errors import InvalidArgumentError


def _run(config: SessionConfig, out: Path, stages=("all",)):
    session = ScanSession(config, out, persist_frames=False)
    return session, session.run(stages)


def _with_motion(config: SessionConfig, offset_mm: float = 0.0) -> SessionConfig:
    motion = MotionScriptSpec(events=[MotionEventSpec(trigger_waypoint=15, translation_mm=(0.0, 15.0))])
    noise = config.noise.model_copy(update={"registration_offset_mm": offset_mm})
    return config.model_copy(update={"motion": motion, "noise": noise})


# Config and metrics


def test_missing_config_file(tmp_path: Path):
    with pytest.raises(InvalidArgumentError):
        load_session_config(tmp_path / "nope.json")


def test_invalid_config_file(tmp_path: Path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"thresholds": {"dice": 1.5}}))
    with pytest.raises(InvalidArgumentError) as excinfo:
        load_session_config(path)
    assert excinfo.value.details["errors"]


def test_tilted_table_is_rejected(tmp_path: Path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"calibration": {"table_normal": [0.0, 0.3, 1.0]}}))
    with pytest.raises(InvalidArgumentError):
        load_session_config(path)


def test_config_defaults_and_round_trip(tmp_path: Path):
    assert load_session_config(None) == SessionConfig()
    config = SessionConfig(seed=4)
    path = tmp_path / "config.json"
    path.write_text(config.model_dump_json())
    assert load_session_config(path) == config


def test_flatten_metrics_uses_dotted_keys():
    document = {"scan": {"frames": 3, "gaps": [1.5, None]}, "seed": 2}
    assert dict(flatten_metrics(document)) == {"scan.frames": 3, "scan.gaps.0": 1.5, "scan.gaps.1": None, "seed": 2}


def test_scan_without_a_plan_is_recorded(tmp_path: Path, session_config):
    session, report = _run(session_config, tmp_path, ("scan", "report"))
    assert report.status == "failed"
    assert report.errors[0].code == "INVALID_ARGUMENT"
    assert report.errors[0].details["stage"] == "scan"
    assert (tmp_path / files.ERRORS_JSON).is_file()


def test_cli_rejects_negative_seed():
    with pytest.raises(InvalidArgumentError):
        main.run(["--seed", "-1"])


def test_cli_stage_on_empty_directory(tmp_path: Path):
    assert main.run(["--out", str(tmp_path), "--stage", "compound"]) == EXIT_ERROR


def test_cli_generates_the_phantom(tmp_path: Path, session_config):
    config_path = tmp_path / "config.json"
    config_path.write_text(session_config.model_dump_json())
    out = tmp_path / "session"
    assert main.run(["--config", str(config_path), "--out", str(out), "--stage", "gen-phantom"]) == EXIT_OK
    phantom = json.loads((out / files.PHANTOM_JSON).read_text())
    assert phantom["length_mm"] == 160.0
    assert (out / files.TEMPLATE_PLY).is_file()


# Planning and scanning


@pytest.mark.slow
def test_plan_stays_on_the_camera_surface_under_a_registration_offset(monkeypatch, session_config, calib, camera):
    config = session_config.model_copy(update={"noise": NoiseSpec(depth_noise_mm=0.0)})
    world = SimWorld.from_config(config, calib, camera)
    register = planning.register_clouds
    shift = RigidTransform.from_translation((0.0, 0.0, 8.0))

    def offset_registration(source, target, *args, **kwargs):
        result = register(source, target, *args, **kwargs)
        return dataclasses.replace(result, transform=shift @ result.transform)

    monkeypatch.setattr(planning, "register_clouds", offset_registration)
    outcome = plan_scan(world, config)
    depth = world.phantom.surface_entry(outcome.trajectory.positions, (0.0, 0.0, -1.0), 20.0)
    assert np.all(np.isfinite(depth))
    assert np.abs(depth).max() < 2.0


@pytest.mark.slow
def test_tilted_probe_is_rolled_back_by_confidence_correction(session_config, calib, camera):
    plan = plan_scan(SimWorld.from_config(session_config, calib, camera), session_config)
    tilted = Trajectory(
        tuple(ScanWaypoint(w.position, w.rotation @ rot_x(30.0)) for w in plan.trajectory.waypoints),
        plan.trajectory.spacing,
    )
    world = SimWorld.from_config(session_config, calib, camera)
    report = ScanRunner(world, session_config, tilted, MotionScript()).run().report()
    assert report.corrections > 0
    assert 0.0 < report.mean_abs_correction_deg <= 45.0


# Full sessions


@pytest.mark.slow
def test_static_session_is_reproducible(tmp_path: Path, session_config):
    _, first = _run(session_config, tmp_path / "a")
    _, second = _run(session_config, tmp_path / "b")
    assert first.status == "completed"
    assert first.scan.sweeps == 1
    assert first.compound.vessel_points > 0
    assert first.compound.vessel_rms_mm < 2.0
    for name in (files.REPORT_JSON, files.METRICS_CSV, files.TRAJECTORY_CSV, files.COMPOUND_PLY):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert "timings" not in (tmp_path / "a" / files.REPORT_JSON).read_text()


@pytest.mark.slow
def test_stages_rerun_from_files(tmp_path: Path, session_config):
    session, report = _run(session_config, tmp_path)
    assert report.status == "completed"
    replay = session.replay()
    assert replay.matches_compound
    assert replay.vessel_points == report.compound.vessel_points

    before = (tmp_path / files.REPORT_JSON).read_bytes()
    _run(session_config, tmp_path, ("compound", "report"))
    assert (tmp_path / files.REPORT_JSON).read_bytes() == before


@pytest.mark.slow
def test_table_motion_is_compensated(tmp_path: Path, session_config):
    _, report = _run(_with_motion(session_config), tmp_path)
    assert report.status == "completed"
    assert report.scan.sweeps == 2
    [motion] = report.scan.motions
    assert motion.accepted
    assert motion.e_mc_mm < 10.0
    assert motion.dice < 0.95
    assert motion.true_translation_mm == pytest.approx(15.0)
    [gap] = report.compound.stitching_gaps_mm
    assert gap is not None and gap < 1e-3
    assert report.compound.vessel_rms_mm <= motion.e_mc_mm + 1.0


@pytest.mark.slow
def test_bad_motion_estimate_aborts_the_sweep(tmp_path: Path, session_config):
    config = _with_motion(session_config, offset_mm=30.0)
    session, report = _run(config, tmp_path)
    assert report.status == "aborted"
    assert session.aborted
    assert report.scan.aborted
    assert report.scan.motions[0].accepted is False
    assert any(e.code == "COMPENSATION_REJECTED" for e in report.errors)

    config_path = tmp_path / "config.json"
    config_path.write_text(config.model_dump_json())
    assert main.run(["--config", str(config_path), "--out", str(tmp_path / "cli")]) == EXIT_GATE_ABORT


# Experiments


@pytest.mark.slow
def test_compensation_error_with_and_without_occluder(session_config):
    rows, summary = compensation_error(session_config)
    assert {r["occluder_fraction"] for r in rows} == {0.0, OCCLUDED_FRACTION}
    means = {s["occluder_fraction"]: s["mean_e_mc_mm"] for s in summary}
    assert all(s["trials"] > 0 for s in summary)
    assert means[0.0] <= 10.0
    assert means[OCCLUDED_FRACTION] <= 10.0
    assert abs(means[OCCLUDED_FRACTION] - means[0.0]) <= 3.0


@pytest.mark.slow
def test_uncompensated_control_run_leaves_a_gap(tmp_path: Path, session_config):
    rows = control_run(_with_motion(session_config), tmp_path)
    runs = {r["run"]: r for r in rows}
    assert runs["compensated"]["status"] == "completed"
    assert runs["compensated"]["max_stitching_gap_mm"] < 1e-3
    gap = runs["control"]["max_stitching_gap_mm"]
    # empty when the vessel left the image after the motion
    assert gap == "" or gap > 10.0
