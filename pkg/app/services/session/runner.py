"""Scan session orchestration: every stage reads and writes the session directory."""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path
from typing import Callable, Sequence

from pydantic import BaseModel, ValidationError

from app.config import settings
from app.schemas.common import ErrorDetail
from app.schemas.session import (
    CompoundReport,
    PhantomReport,
    PlanReport,
    ReplayReport,
    ScanReport,
    SessionConfig,
    SessionReport,
)
from app.services.compensate import CompoundVolume, compound_sweeps, stitching_gap, vessel_rms_error
from app.services.geom import read_ply, transform_from_spec, write_ply
from app.services.monitor import CameraModel
from app.services.planner import calibration_from_file, read_trajectory_csv, write_trajectory_csv
from app.services.session import artifacts as files
from app.services.session.artifacts import ArtifactStore
from app.services.session.planning import plan_scan
from app.services.session.scan import ScanRunner
from app.services.simworld import MotionScript, SimWorld
from app.utils.errors import CompensationRejectedError, InvalidArgumentError, ScanPilotError, UndefinedGapError
from app.utils.logger import get_logger
from app.utils.sentry_utils import set_session_context
from app.utils.timing import StageTimer

logger = get_logger("session")

PIPELINE = ("gen-phantom", "plan", "scan", "compound", "report")
STAGES = PIPELINE + ("replay", "experiments", "all")

TRUTH_CENTERLINE_STEP_MM = 0.5


def _finite_or_none(value: float) -> float | None:
    return None if math.isnan(value) else value


class ScanSession:
    """One reproducible session rooted at an output directory.

    Stages hand over through files only, so any stage can be re-run on its own
    against the directory an earlier run left behind.
    """

    def __init__(self, config: SessionConfig, out_dir: str | Path | None = None, persist_frames: bool | None = None):
        self.config = config
        self.session_id = f"scan-{config.seed:08d}"
        if out_dir is None:
            out_dir = config.output_dir or Path(settings.output_dir) / self.session_id
        self.store = ArtifactStore(out_dir)
        self.persist_frames = settings.persist_frames if persist_frames is None else persist_frames
        self.calib = calibration_from_file(config.calibration)
        self.camera = CameraModel.from_spec(config.calibration.camera)
        self.timer = StageTimer()
        self.errors: list[ErrorDetail] = []
        self.aborted = False

    def new_world(self) -> SimWorld:
        """Fresh simulated world; identical for every stage of the same config."""
        return SimWorld.from_config(self.config, self.calib, self.camera)

    # Stages

    def gen_phantom(self) -> PhantomReport:
        world = self.new_world()
        phantom = world.phantom
        phantom.export(self.store.path(files.PHANTOM_DIR))
        template = phantom.template_cloud(self.config.sampling.template_points)
        artery = phantom.artery_cloud()
        write_ply(self.store.path(files.TEMPLATE_PLY), template)
        write_ply(self.store.path(files.ARTERY_PLY), artery)
        report = PhantomReport(
            shape=phantom.params.shape,
            length_mm=phantom.params.length_mm,
            surface_points=len(phantom.surface),
            template_points=len(template),
            artery_points=len(artery),
            centerline_points=len(phantom.centerline()),
        )
        self.store.write_model(files.PHANTOM_JSON, report)
        return report

    def plan(self) -> PlanReport:
        template = read_ply(self.store.require(files.TEMPLATE_PLY, "gen-phantom"))
        artery = read_ply(self.store.require(files.ARTERY_PLY, "gen-phantom"))
        outcome = plan_scan(self.new_world(), self.config, template, artery)
        write_trajectory_csv(self.store.path(files.TRAJECTORY_CSV), outcome.trajectory)
        write_ply(self.store.path(files.CAMERA_CLOUD_PLY), outcome.camera_cloud)
        report = outcome.report()
        self.store.write_model(files.PLAN_JSON, report)
        return report

    def scan(self) -> ScanReport:
        plan = self.store.read_model(files.PLAN_JSON, PlanReport, "plan")
        trajectory = read_trajectory_csv(self.store.require(files.TRAJECTORY_CSV, "plan"), spacing=plan.spacing_mm)
        world = self.new_world()
        # from here on the robot only knows the calibrated hand-eye transform
        world.calib = dataclasses.replace(world.calib, hand_eye=transform_from_spec(plan.hand_eye))
        script = MotionScript.from_spec(self.config.motion, self.config.seed)

        outcome = ScanRunner(world, self.config, trajectory, script, keep_images=self.persist_frames).run()
        self.store.save_sweeps(outcome.sweeps, images=self.persist_frames)
        self.store.write_points_csv(files.TRUTH_CENTERLINE_CSV, world.phantom.centerline(TRUTH_CENTERLINE_STEP_MM))
        report = outcome.report()
        self.store.write_model(files.SCAN_JSON, report)
        if outcome.error is not None:
            self._record("scan", outcome.error)
        return report

    def _compound_volume(self) -> tuple[CompoundVolume, int, float | None]:
        sweeps = self.store.load_sweeps()
        volume = compound_sweeps(sweeps, self.calib, self.config.compound_mode)
        centerline = self.store.read_points_csv(files.TRUTH_CENTERLINE_CSV, "scan")
        return volume, len(sweeps), _finite_or_none(vessel_rms_error(volume, centerline))

    def compound(self) -> CompoundReport:
        volume, sweep_count, rms = self._compound_volume()
        volume.save(self.store.path(files.COMPOUND_PLY))
        gaps: list[float | None] = []
        for sweep_id in range(sweep_count - 1):
            try:
                gaps.append(stitching_gap(volume, sweep_id, sweep_id + 1))
            except UndefinedGapError as e:
                logger.warning(f"Stitching gap {sweep_id}->{sweep_id + 1} undefined: {e.message}")
                gaps.append(None)
        report = CompoundReport(
            mode=self.config.compound_mode,
            vessel_points=len(volume),
            vessel_rms_mm=rms,
            stitching_gaps_mm=gaps,
        )
        self.store.write_model(files.COMPOUND_JSON, report)
        return report

    def replay(self) -> ReplayReport:
        """Re-compound the persisted sweeps and check them against the compound stage."""
        compound = self.store.read_model(files.COMPOUND_JSON, CompoundReport, "compound")
        volume, sweep_count, rms = self._compound_volume()
        report = ReplayReport(
            sweeps=sweep_count,
            vessel_points=len(volume),
            vessel_rms_mm=rms,
            matches_compound=len(volume) == compound.vessel_points and rms == compound.vessel_rms_mm,
        )
        if not report.matches_compound:
            logger.warning("Replayed compounding differs from the stored compound report")
        self.store.write_model(files.REPLAY_JSON, report)
        return report

    def report(self) -> SessionReport:
        """Merge the stage files into report.json and metrics.csv."""
        scan = self.store.read_optional(files.SCAN_JSON, ScanReport)
        errors = self.store.read_errors()
        if (scan is not None and scan.aborted) or any(e.code == CompensationRejectedError.code for e in errors):
            status = "aborted"
        elif errors:
            status = "failed"
        else:
            status = "completed"
        report = SessionReport(
            session_id=self.session_id,
            seed=self.config.seed,
            status=status,
            phantom=self.store.read_optional(files.PHANTOM_JSON, PhantomReport),
            plan=self.store.read_optional(files.PLAN_JSON, PlanReport),
            scan=scan,
            compound=self.store.read_optional(files.COMPOUND_JSON, CompoundReport),
            errors=errors,
        )
        self.store.write_model(files.REPORT_JSON, report)
        self.store.write_metrics(report)
        logger.info(f"[REPORT] {self.session_id}: {status}")
        return report

    def experiments(self) -> None:
        from app.services.session.experiments import run_experiments

        run_experiments(self.config, self.store.path(files.EXPERIMENTS_DIR))

    # Orchestration

    def _record(self, stage: str, error: ScanPilotError) -> None:
        detail = error.to_error_detail()
        detail.details = {**(detail.details or {}), "stage": stage}
        self.errors.append(detail)
        if isinstance(error, CompensationRejectedError):
            self.aborted = True
        kept = [e for e in self.store.read_errors() if (e.details or {}).get("stage") != stage]
        self.store.write_errors(kept + [e for e in self.errors if e.details["stage"] == stage])

    def _clear_errors(self, stage: str) -> None:
        existing = self.store.read_errors()
        kept = [e for e in existing if (e.details or {}).get("stage") != stage]
        if len(kept) != len(existing):
            self.store.write_errors(kept)

    def run_stage(self, stage: str) -> BaseModel | None:
        """Run one stage; expected failures are recorded and logged, not raised."""
        handlers: dict[str, Callable[[], BaseModel | None]] = {
            "gen-phantom": self.gen_phantom,
            "plan": self.plan,
            "scan": self.scan,
            "compound": self.compound,
            "report": self.report,
            "replay": self.replay,
            "experiments": self.experiments,
        }
        if stage not in handlers:
            raise InvalidArgumentError(f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}")
        self._clear_errors(stage)
        logger.info(f"[STAGE] {stage} started ({self.session_id})")
        with self.timer.stage(stage):
            try:
                return handlers[stage]()
            except ScanPilotError as e:
                logger.error(f"[STAGE] {stage} failed: {e.code} {e.message}")
                self._record(stage, e)
                return None

    def run(self, stages: Sequence[str] = ("all",)) -> SessionReport | None:
        """Run the named stages in order; ``all`` is the full pipeline up to the report."""
        set_session_context(self.session_id, self.config.seed)
        expanded: list[str] = []
        for stage in stages:
            expanded.extend(PIPELINE if stage == "all" else (stage,))
        if "all" in stages:
            self.store.clear_stage_documents()

        report = None
        for stage in expanded:
            result = self.run_stage(stage)
            if isinstance(result, SessionReport):
                report = result
            elif result is None and self.errors and stage in PIPELINE and stage != "report":
                if "report" in expanded:
                    report = self.run_stage("report")
                break
        self.store.write_timings(self.timer.as_dict())
        return report


def run_scan_session(config: SessionConfig, out_dir: str | Path | None = None) -> SessionReport:
    """Plan, scan, compensate, compound and report one session; deterministic for a given seed."""
    report = ScanSession(config, out_dir).run(("all",))
    if report is None:
        raise ScanPilotError("the report stage did not produce a report")
    return report


def load_session_config(path: str | Path | None) -> SessionConfig:
    """Parse and validate a JSON session config; no path means all defaults."""
    if path is None:
        return SessionConfig()
    path = Path(path)
    try:
        return SessionConfig.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise InvalidArgumentError(f"session config {path} not found") from e
    except ValidationError as e:
        raise InvalidArgumentError(f"invalid session config {path}", {"errors": json.loads(e.json())}) from e
