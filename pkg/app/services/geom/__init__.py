"""Core 3D types and geometric primitives."""

from app.services.geom.transform import (
    RigidTransform,
    Vec3,
    as_vec3,
    best_fit_transform,
    compose_all,
    nearest_rotation,
    rot_x,
    rot_z,
    transform_from_spec,
    transform_to_spec,
)
from app.services.geom.cloud import (
    NormalEstimation,
    PointCloud,
    PrincipalAxes,
    cloud_mse,
    crop_along_principal_axis,
    estimate_normals,
    knn_search,
    principal_axes,
)
from app.services.geom.sampling import PoissonDiscSampler, poisson_disc_sample, poisson_disc_sample_count
from app.services.geom.ply import read_ply, read_ply_table, write_ply

__all__ = [
    "RigidTransform",
    "Vec3",
    "as_vec3",
    "best_fit_transform",
    "compose_all",
    "nearest_rotation",
    "rot_x",
    "rot_z",
    "transform_from_spec",
    "transform_to_spec",
    "NormalEstimation",
    "PointCloud",
    "PrincipalAxes",
    "cloud_mse",
    "crop_along_principal_axis",
    "estimate_normals",
    "knn_search",
    "principal_axes",
    "PoissonDiscSampler",
    "poisson_disc_sample",
    "poisson_disc_sample_count",
    "read_ply",
    "read_ply_table",
    "write_ply",
]
