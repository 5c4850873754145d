"""Coarse-to-fine registration with multiple starting hypotheses."""

from __future__ import annotations

import itertools

import numpy as np

from app.services.geom import PointCloud, RigidTransform, principal_axes
from app.services.registration.coarse import CoarseParams, coarse_align
from app.services.registration.icp import IcpParams, RegistrationResult, icp_refine
from app.utils.errors import CoarseAlignmentError, DegenerateInputError, RegistrationFailedError
from app.utils.logger import get_logger

logger = get_logger("registration")


def principal_axis_hypotheses(source: PointCloud, target: PointCloud) -> list[RigidTransform]:
    """Transforms aligning the principal frames of both clouds, one per sign choice."""
    try:
        axes_s = principal_axes(source)
        axes_t = principal_axes(target)
    except DegenerateInputError:
        return []

    hypotheses = []
    for sign_1, sign_2 in itertools.product((1.0, -1.0), repeat=2):
        frame_t = axes_t.axes.copy()
        frame_t[0] *= sign_1
        frame_t[1] *= sign_2
        frame_t[2] = np.cross(frame_t[0], frame_t[1])
        rotation = frame_t.T @ axes_s.axes
        hypotheses.append(RigidTransform.about_point(rotation, axes_s.mean, axes_t.mean - axes_s.mean))
    return hypotheses


def register_clouds(
    source: PointCloud,
    target: PointCloud,
    icp_params: IcpParams | None = None,
    coarse_params: CoarseParams | None = None,
    use_principal_axes: bool = True,
) -> RegistrationResult:
    """Register ``source`` onto ``target``.

    ICP runs from the feature-based coarse alignment, from the principal-axis
    alignments and from identity; the run with the lowest final MSE wins.
    """
    starts: list[tuple[str, RigidTransform]] = [("identity", RigidTransform.identity())]
    if source.has_normals and target.has_normals:
        try:
            starts.insert(0, ("coarse", coarse_align(source, target, coarse_params)))
        except CoarseAlignmentError as e:
            logger.warning(f"Coarse alignment failed ({e.message}), falling back to other starts")
    if use_principal_axes:
        starts += [(f"pca-{i}", t) for i, t in enumerate(principal_axis_hypotheses(source, target))]

    best: RegistrationResult | None = None
    best_name = ""
    last_error: RegistrationFailedError | None = None
    for name, init in starts:
        try:
            result = icp_refine(source, target, init, icp_params)
        except RegistrationFailedError as e:
            last_error = e
            continue
        logger.debug(f"Start {name}: final mse {result.final_mse:.4f} mm after {result.iterations} iterations")
        if best is None or result.final_mse < best.final_mse - 1e-12:
            best, best_name = result, name

    if best is None:
        raise last_error or RegistrationFailedError("no registration start converged")

    logger.info(
        f"Registration ({best_name} start): mse {best.final_mse:.4f} mm, "
        f"{best.iterations} iterations, converged={best.converged}"
    )
    return best
