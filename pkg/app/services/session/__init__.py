"""Scan sessions: planning, the scan loop, artifacts and the stage runner."""

from app.services.session.artifacts import ArtifactStore, flatten_metrics
from app.services.session.planning import PlanOutcome, camera_cloud, plan_scan, registration_record
from app.services.session.runner import PIPELINE, STAGES, ScanSession, load_session_config, run_scan_session
from app.services.session.scan import ScanOutcome, ScanRunner

__all__ = [
    "ArtifactStore",
    "flatten_metrics",
    "PlanOutcome",
    "camera_cloud",
    "plan_scan",
    "registration_record",
    "PIPELINE",
    "STAGES",
    "ScanSession",
    "load_session_config",
    "run_scan_session",
    "ScanOutcome",
    "ScanRunner",
]
