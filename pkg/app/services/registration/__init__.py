"""Coarse feature alignment plus ICP refinement."""

from app.services.registration.descriptors import (
    FeatureDescriptor,
    MultiscaleDescriptors,
    multiscale_descriptors,
    point_feature_histograms,
)
from app.services.registration.coarse import CoarseParams, Correspondence, coarse_align
from app.services.registration.icp import IcpParams, RegistrationResult, icp_refine, truncated_rmse
from app.services.registration.pipeline import principal_axis_hypotheses, register_clouds

__all__ = [
    "FeatureDescriptor",
    "MultiscaleDescriptors",
    "multiscale_descriptors",
    "point_feature_histograms",
    "CoarseParams",
    "Correspondence",
    "coarse_align",
    "IcpParams",
    "RegistrationResult",
    "icp_refine",
    "truncated_rmse",
    "principal_axis_hypotheses",
    "register_clouds",
]
