"""Schemas for scan-session configuration and reports"""

from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field, field_validator, model_validator

from app.schemas.calibration import CalibrationFile
from app.schemas.common import ErrorDetail, TransformSpec
from app.schemas.motion import MotionScriptSpec
from app.schemas.phantom import FiducialSpec, PhantomParams, PlacementSpec
from app.utils.constants import (
    CENTERLINE_INTERVAL_MM,
    CONFIDENCE_ALPHA,
    CONFIDENCE_BETA,
    CONFIDENCE_GAMMA,
    CONFIDENCE_THRESHOLD,
    CONTACT_FORCE_N,
    CONTACT_STIFFNESS_N_PER_M,
    DEPTH_NOISE_MM,
    DICE_THRESHOLD,
    EMC_GATE_MM,
    LOOKAHEAD_POINTS,
    SPECKLE_SIGMA,
    STIFFNESS_RANGE_N_PER_M,
    SURFACE_NEIGHBOURS,
    TEMPLATE_POINT_COUNT,
)


class ThresholdSpec(BaseModel):
    """Detection, gating and planning thresholds"""
    dice: float = Field(default=DICE_THRESHOLD, gt=0, lt=1, description="Dice score below which motion is flagged")
    confidence: float = Field(default=CONFIDENCE_THRESHOLD, gt=0, lt=1, description="confidence binarization threshold")
    emc_gate_mm: float = Field(default=EMC_GATE_MM, gt=0)
    lookahead: int = Field(default=LOOKAHEAD_POINTS, ge=1, description="waypoints ahead that share an orientation correction")
    centerline_interval_mm: float = Field(default=CENTERLINE_INTERVAL_MM, gt=0, description="centerline sampling interval")
    surface_neighbours: int = Field(default=SURFACE_NEIGHBOURS, ge=1, description="surface neighbours per projected centerline point")
    plane_cut_height_mm: float = Field(default=150.0, gt=0, description="depth filter z_cut in the base frame")


class ConfidenceSpec(BaseModel):
    """Random-walk parameters"""
    alpha: float = Field(default=CONFIDENCE_ALPHA, gt=0)
    beta: float = Field(default=CONFIDENCE_BETA, gt=0)
    gamma: float = Field(default=CONFIDENCE_GAMMA, gt=0)
    downsample: int = Field(default=4, ge=1)


class ToggleSpec(BaseModel):
    """Algorithm switches for ablations and control runs"""
    compensate: bool = True
    confidence_correction: bool = True
    fine_adjust: bool = True


class ContactSpec(BaseModel):
    """Constant-force contact surrogate"""
    force_n: float = Field(default=CONTACT_FORCE_N, ge=0)
    stiffness_n_per_m: float = Field(default=CONTACT_STIFFNESS_N_PER_M)

    @field_validator("stiffness_n_per_m")
    @classmethod
    def stiffness_in_range(cls, value: float) -> float:
        low, high = STIFFNESS_RANGE_N_PER_M
        if not low <= value <= high:
            raise ValueError(f"stiffness must be within [{low}, {high}] N/m")
        return value


class NoiseSpec(BaseModel):
    """Sensor noise, occlusion and fault injection"""
    depth_noise_mm: float = Field(default=DEPTH_NOISE_MM, ge=0)
    speckle_sigma: float = Field(default=SPECKLE_SIGMA, ge=0)
    occluder_fraction: float = Field(default=0.0, ge=0, lt=1)
    hand_eye_noise_mm: float = Field(default=0.1, ge=0, description="noise of the calibration point pairs")
    registration_offset_mm: float = Field(
        default=0.0, ge=0, description="offset added to the recovered motion (gate-abort drills)"
    )


class SamplingSpec(BaseModel):
    """Point counts and radii of the clouds fed to registration"""
    template_points: int = Field(default=TEMPLATE_POINT_COUNT, ge=50)
    camera_radius_mm: float = Field(default=6.0, gt=0, description="Poisson disc radius for camera clouds")


class SessionConfig(BaseModel):
    """Everything a reproducible scan session needs"""
    seed: int = Field(default=0, ge=0)
    phantom: PhantomParams = PhantomParams()
    placement: PlacementSpec = PlacementSpec()
    fiducial: FiducialSpec = FiducialSpec()
    calibration_path: str | None = None
    calibration: CalibrationFile = CalibrationFile()
    motion: MotionScriptSpec = MotionScriptSpec()
    thresholds: ThresholdSpec = ThresholdSpec()
    confidence: ConfidenceSpec = ConfidenceSpec()
    toggles: ToggleSpec = ToggleSpec()
    contact: ContactSpec = ContactSpec()
    noise: NoiseSpec = NoiseSpec()
    sampling: SamplingSpec = SamplingSpec()
    compound_mode: Literal["centroid", "contour"] = "centroid"
    output_dir: str | None = Field(default=None, description="defaults to <SCANPILOT_OUTPUT_DIR>/scan-<seed>")

    @model_validator(mode="after")
    def load_calibration_file(self) -> "SessionConfig":
        if self.calibration_path is not None:
            path = Path(self.calibration_path)
            if not path.is_file():
                raise ValueError(f"calibration file {path} does not exist")
            self.calibration = CalibrationFile.model_validate_json(path.read_text(encoding="utf-8"))
        return self


class RegistrationRecord(BaseModel):
    """One registration run"""
    mse_history: list[float]
    iterations: int
    converged: bool
    final_mse_mm: float
    source_points: int
    target_points: int


class PlanReport(BaseModel):
    hand_eye: TransformSpec
    hand_eye_residual_mm: float
    registration: RegistrationRecord
    centerline_points: int
    waypoints: int
    spacing_mm: float


class MotionRecord(BaseModel):
    """A detected motion and what was done about it"""
    frame: int
    waypoint: int
    reference_frame: int
    dice: float
    e_mc_mm: float | None = None
    accepted: bool | None = None
    registration: RegistrationRecord | None = None
    true_translation_mm: float
    true_rotation_deg: float


class ScanReport(BaseModel):
    frames: int
    sweeps: int
    corrections: int
    mean_abs_correction_deg: float
    contact_losses: int
    motions: list[MotionRecord] = Field(default_factory=list)
    aborted: bool = False


class CompoundReport(BaseModel):
    mode: str
    vessel_points: int
    vessel_rms_mm: float | None
    stitching_gaps_mm: list[float | None] = Field(default_factory=list)


class PhantomReport(BaseModel):
    shape: str
    length_mm: float
    surface_points: int
    template_points: int
    artery_points: int
    centerline_points: int


class ReplayReport(BaseModel):
    """Compounding recomputed from the persisted sweeps"""
    sweeps: int
    vessel_points: int
    vessel_rms_mm: float | None
    matches_compound: bool


class SessionReport(BaseModel):
    """Per-stage metrics of a scan session; contains nothing time-dependent"""
    session_id: str
    seed: int
    status: Literal["completed", "aborted", "failed"]
    phantom: PhantomReport | None = None
    plan: PlanReport | None = None
    scan: ScanReport | None = None
    compound: CompoundReport | None = None
    errors: list[ErrorDetail] = Field(default_factory=list)
