"""Point-to-point iterative closest point refinement."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field

from app.services.geom import PointCloud, RigidTransform, best_fit_transform
from app.utils.constants import (
    ICP_MAX_ITERATIONS,
    ICP_MSE_DELTA_TOLERANCE_MM,
    ICP_REJECTION_FACTOR,
)
from app.utils.errors import InvalidArgumentError, RegistrationFailedError
from app.utils.logger import get_logger

logger = get_logger("registration.icp")


class IcpParams(BaseModel):
    """ICP stopping and rejection settings."""

    max_iterations: int = Field(default=ICP_MAX_ITERATIONS, gt=0)
    mse_delta_tolerance: float = Field(default=ICP_MSE_DELTA_TOLERANCE_MM, gt=0, description="mm")
    rejection_distance: float | None = Field(
        default=None, gt=0, description="mm; default is 5x the target's median spacing"
    )

    model_config = {"frozen": True}

    def resolve_rejection(self, target: PointCloud) -> float:
        if self.rejection_distance is not None:
            return self.rejection_distance
        return ICP_REJECTION_FACTOR * target.median_spacing


@dataclass(frozen=True)
class RegistrationResult:
    """Outcome of a registration with its convergence telemetry."""

    transform: RigidTransform
    mse_history: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    @property
    def final_mse(self) -> float:
        return self.mse_history[-1] if self.mse_history else float("nan")

    def to_records(self) -> list[dict[str, float]]:
        """(iteration, MSE) records for structured reports."""
        return [{"iteration": i, "mse_mm": value} for i, value in enumerate(self.mse_history)]


def truncated_rmse(distances: np.ndarray, rejection: float) -> float:
    """RMS of distances clipped at the rejection distance."""
    return float(np.sqrt(np.mean(np.minimum(distances, rejection) ** 2)))


def icp_refine(
    source: PointCloud,
    target: PointCloud,
    init: RigidTransform | None = None,
    params: IcpParams | None = None,
) -> RegistrationResult:
    """Align ``source`` onto ``target`` starting from ``init``.

    Each iteration pairs every moved source point with its nearest target point,
    drops pairs farther than the rejection distance and applies the SVD best fit.
    The reported MSE is the RMS of distances clipped at the rejection distance,
    which cannot increase from one iteration to the next.
    """
    if source.is_empty or target.is_empty:
        raise InvalidArgumentError("ICP needs two non-empty clouds")

    params = params or IcpParams()
    current = init or RigidTransform.identity()
    rejection = params.resolve_rejection(target)
    history: list[float] = []
    converged = False
    iterations = 0

    for iteration in range(params.max_iterations):
        moved = current.apply(source.points)
        distances, indices = target.tree.query(moved)
        inliers = distances < rejection
        if not inliers.any():
            logger.error(f"ICP lost all correspondences at iteration {iteration} (rejection {rejection:.2f} mm)")
            raise RegistrationFailedError("all correspondences rejected", history)

        rmse = truncated_rmse(distances, rejection)
        if history and rmse > history[-1] + 1e-9:
            logger.warning(f"ICP error increased at iteration {iteration}: {history[-1]:.6f} -> {rmse:.6f} mm")
        history.append(rmse)
        logger.debug(f"[ICP] iteration={iteration} mse={rmse:.6f}mm inliers={int(inliers.sum())}")

        if len(history) > 1 and history[-2] - rmse < params.mse_delta_tolerance:
            converged = True
            break

        step = best_fit_transform(moved[inliers], target.points[indices[inliers]])
        current = step @ current
        iterations += 1
    else:
        distances, _ = target.tree.query(current.apply(source.points))
        history.append(truncated_rmse(distances, rejection))

    logger.debug(
        f"ICP finished: iterations={iterations} converged={converged} final_mse={history[-1]:.4f}mm"
    )
    return RegistrationResult(
        transform=current,
        mse_history=history,
        iterations=iterations,
        converged=converged,
    )
