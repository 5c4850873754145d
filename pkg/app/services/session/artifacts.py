"""On-disk layout of a session directory and the readers/writers for each stage file."""

from __future__ import annotations

import csv
import json
import shutil
from pathlib import Path
from typing import Any, Iterator, TypeVar

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, TypeAdapter, ValidationError

from app.schemas.common import ErrorDetail
from app.schemas.session import SessionReport
from app.services.compensate import SweepRecord
from app.utils.errors import InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("session.artifacts")

ModelT = TypeVar("ModelT", bound=BaseModel)

PHANTOM_DIR = "phantom"
PLAN_DIR = "plan"
SCAN_DIR = "scan"
COMPOUND_DIR = "compound"
SWEEPS_DIR = f"{SCAN_DIR}/sweeps"

PHANTOM_JSON = f"{PHANTOM_DIR}/phantom.json"
TEMPLATE_PLY = f"{PHANTOM_DIR}/template.ply"
ARTERY_PLY = f"{PHANTOM_DIR}/artery.ply"
PLAN_JSON = f"{PLAN_DIR}/plan.json"
TRAJECTORY_CSV = f"{PLAN_DIR}/trajectory.csv"
CAMERA_CLOUD_PLY = f"{PLAN_DIR}/camera_cloud.ply"
SCAN_JSON = f"{SCAN_DIR}/scan.json"
TRUTH_CENTERLINE_CSV = f"{SCAN_DIR}/truth_centerline.csv"
COMPOUND_JSON = f"{COMPOUND_DIR}/compound.json"
COMPOUND_PLY = f"{COMPOUND_DIR}/compound.ply"
REPLAY_JSON = "replay.json"
REPORT_JSON = "report.json"
METRICS_CSV = "metrics.csv"
TIMINGS_JSON = "timings.json"
ERRORS_JSON = "errors.json"
EXPERIMENTS_DIR = "experiments"

_errors_adapter = TypeAdapter(list[ErrorDetail])


def flatten_metrics(value: Any, prefix: str = "") -> Iterator[tuple[str, Any]]:
    """Dotted ``key, value`` pairs of a JSON-like document; list items are indexed."""
    if isinstance(value, dict):
        for key, item in value.items():
            yield from flatten_metrics(item, f"{prefix}.{key}" if prefix else key)
    elif isinstance(value, list):
        for index, item in enumerate(value):
            yield from flatten_metrics(item, f"{prefix}.{index}")
    else:
        yield prefix, value


class ArtifactStore:
    """Session directory with one sub-directory per stage.

    Every file is written deterministically: JSON through pydantic with a fixed
    indent, floats in CSV/PLY with 17 significant digits.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path(self, relative: str) -> Path:
        return self.root / relative

    def exists(self, relative: str) -> bool:
        return self.path(relative).is_file()

    def _prepare(self, relative: str) -> Path:
        path = self.path(relative)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def require(self, relative: str, stage: str) -> Path:
        """Path of an input produced by an earlier stage; fails with a hint when it is missing."""
        path = self.path(relative)
        if not path.is_file():
            raise InvalidArgumentError(
                f"{path} not found; run the {stage} stage first", {"path": str(path), "stage": stage}
            )
        return path

    # JSON documents

    def write_model(self, relative: str, model: BaseModel) -> Path:
        path = self._prepare(relative)
        path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.debug(f"Wrote {path}")
        return path

    def read_model(self, relative: str, model_type: type[ModelT], stage: str) -> ModelT:
        path = self.require(relative, stage)
        try:
            return model_type.model_validate_json(path.read_text(encoding="utf-8"))
        except ValidationError as e:
            raise InvalidArgumentError(f"invalid {path}", {"errors": json.loads(e.json())}) from e

    def read_optional(self, relative: str, model_type: type[ModelT]) -> ModelT | None:
        if not self.exists(relative):
            return None
        return self.read_model(relative, model_type, stage="any")

    def write_errors(self, errors: list[ErrorDetail]) -> Path:
        path = self._prepare(ERRORS_JSON)
        path.write_bytes(_errors_adapter.dump_json(errors, indent=2) + b"\n")
        return path

    def read_errors(self) -> list[ErrorDetail]:
        if not self.exists(ERRORS_JSON):
            return []
        return _errors_adapter.validate_json(self.path(ERRORS_JSON).read_bytes())

    def write_timings(self, durations: dict[str, float]) -> Path:
        path = self._prepare(TIMINGS_JSON)
        path.write_text(json.dumps(durations, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    def clear_stage_documents(self) -> None:
        """Remove the stage JSON files so a full run cannot pick up a previous run's results."""
        for relative in (PHANTOM_JSON, PLAN_JSON, SCAN_JSON, COMPOUND_JSON, REPLAY_JSON, REPORT_JSON, ERRORS_JSON):
            self.path(relative).unlink(missing_ok=True)

    # Tables

    def write_points_csv(self, relative: str, points: ArrayLike) -> Path:
        path = self._prepare(relative)
        np.savetxt(path, np.asarray(points, dtype=np.float64).reshape(-1, 3), delimiter=",", header="x,y,z",
                   comments="", fmt="%.17g")
        return path

    def read_points_csv(self, relative: str, stage: str) -> NDArray[np.float64]:
        path = self.require(relative, stage)
        return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)

    def write_metrics(self, report: SessionReport) -> Path:
        """Flat ``metric,value`` CSV of the report for plotting."""
        path = self._prepare(METRICS_CSV)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["metric", "value"])
            for key, value in flatten_metrics(report.model_dump(mode="json", exclude={"errors"})):
                writer.writerow([key, "" if value is None else value])
        return path

    def write_rows(self, relative: str, rows: list[dict[str, Any]]) -> Path:
        """CSV with the keys of the first row as header (experiment tables)."""
        path = self._prepare(relative)
        with path.open("w", encoding="utf-8", newline="") as handle:
            if not rows:
                return path
            writer = csv.DictWriter(handle, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        logger.info(f"Wrote {len(rows)} rows to {path}")
        return path

    # Sweeps

    def sweep_dir(self, sweep_id: int) -> Path:
        return self.path(SWEEPS_DIR) / f"sweep_{sweep_id:02d}"

    def save_sweeps(self, sweeps: list[SweepRecord], images: bool = False) -> list[Path]:
        shutil.rmtree(self.path(SWEEPS_DIR), ignore_errors=True)
        return [sweep.save(self.sweep_dir(sweep.sweep_id), images=images) for sweep in sweeps]

    def load_sweeps(self) -> list[SweepRecord]:
        directory = self.path(SWEEPS_DIR)
        if not directory.is_dir():
            raise InvalidArgumentError(f"{directory} not found; run the scan stage first", {"stage": "scan"})
        sweep_dirs = sorted(p for p in directory.iterdir() if p.is_dir() and p.name.startswith("sweep_"))
        return [SweepRecord.load(p, int(p.name.removeprefix("sweep_"))) for p in sweep_dirs]
