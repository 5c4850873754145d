"""Synthetic arm phantom: uneven tube (or slab) with an embedded vessel."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree

from app.schemas.phantom import PhantomParams
from app.services.geom import PointCloud, RigidTransform, Vec3, poisson_disc_sample_count, write_ply
from app.utils.constants import CONTACT_SEARCH_MM, TEMPLATE_POINT_COUNT
from app.utils.errors import InvalidArgumentError
from app.utils.logger import get_logger

logger = get_logger("simworld.phantom")

PERTURBATION_TERMS = 4
CAMERA_SURFACE_STEP_MM = 0.8
ARTERY_RING_SAMPLES = 24
MARCH_STEP_MM = 0.5
BISECTION_STEPS = 40
# Template keeps the part of the surface a CT scan of the lying arm would segment.
TEMPLATE_MIN_NORMAL_Z = -0.2


@dataclass(frozen=True, eq=False)
class PhantomGeometry:
    """Phantom shape in its local frame.

    The arm runs along local X over [-L/2, L/2] and rests on the table plane
    z = 0. ``f`` is a seeded sum of low-frequency sinusoids with |f| <= 1 that
    perturbs the tube radius (or the slab top) by ``roughness_mm * f``.
    """

    params: PhantomParams
    seed: int
    amplitudes: NDArray[np.float64]
    axial_freqs: NDArray[np.float64]
    cross_freqs: NDArray[np.float64]
    phases: NDArray[np.float64]
    wander_phase: float

    @classmethod
    def generate(cls, params: PhantomParams, seed: int) -> PhantomGeometry:
        rng = np.random.default_rng(seed)
        amplitudes = rng.uniform(0.5, 1.0, PERTURBATION_TERMS)
        return cls(
            params=params,
            seed=seed,
            amplitudes=amplitudes / amplitudes.sum(),
            axial_freqs=rng.integers(1, 4, PERTURBATION_TERMS).astype(np.float64),
            cross_freqs=rng.integers(1, 4, PERTURBATION_TERMS).astype(np.float64),
            phases=rng.uniform(0.0, 2.0 * np.pi, PERTURBATION_TERMS),
            wander_phase=float(rng.uniform(0.0, 2.0 * np.pi)),
        )

    @property
    def half_length(self) -> float:
        return self.params.length_mm / 2.0

    @property
    def top_height(self) -> float:
        """Nominal height of the top surface above the table."""
        r = self.params.arm_radius_mm
        return 2.0 * r if self.params.shape == "tube" else r

    # Perturbation

    def perturbation(
        self, x: NDArray[np.float64], v: NDArray[np.float64]
    ) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
        """f, df/dx and df/dv with v the angle (tube) or the lateral position (slab)."""
        x = np.asarray(x, dtype=np.float64)[..., None]
        v = np.asarray(v, dtype=np.float64)[..., None]
        axial = 2.0 * np.pi * self.axial_freqs / self.params.length_mm
        cross_scale = 1.0 if self.params.shape == "tube" else np.pi / self.params.arm_radius_mm
        argument = axial * x + self.cross_freqs * cross_scale * v + self.phases
        value = np.sum(self.amplitudes * np.sin(argument), axis=-1)
        cosine = self.amplitudes * np.cos(argument)
        return value, np.sum(cosine * axial, axis=-1), np.sum(cosine * self.cross_freqs * cross_scale, axis=-1)

    # Vessel

    def vessel_center(self, x: ArrayLike) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=np.float64)
        p = self.params
        y = p.vessel_wander_mm * np.sin(2.0 * np.pi * x / p.length_mm + self.wander_phase)
        z = np.full_like(x, self.top_height - p.vessel_depth_mm)
        return np.stack([x, y, z], axis=-1)

    def vessel_distance(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        """Distance to the centerline within the x = const cross-section."""
        centers = self.vessel_center(points[..., 0])
        return np.hypot(points[..., 1] - centers[..., 1], points[..., 2] - centers[..., 2])

    # Implicit shape

    def inside(self, points: NDArray[np.float64]) -> NDArray[np.bool_]:
        points = np.asarray(points, dtype=np.float64)
        x, y, z = points[..., 0], points[..., 1], points[..., 2]
        p = self.params
        in_length = np.abs(x) <= self.half_length
        if p.shape == "tube":
            dz = z - p.arm_radius_mm
            phi = np.arctan2(y, dz)
            radius = p.arm_radius_mm + p.roughness_mm * self.perturbation(x, phi)[0]
            return in_length & (np.hypot(y, dz) < radius)
        top = p.arm_radius_mm + p.roughness_mm * self.perturbation(x, y)[0]
        return in_length & (np.abs(y) <= p.arm_radius_mm) & (z >= 0.0) & (z < top)

    # Surface sampling

    def _tube_surface(self, axial_step: float, angular: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        p = self.params
        x = np.arange(-self.half_length, self.half_length + 1e-9, axial_step)
        phi = np.linspace(0.0, 2.0 * np.pi, angular, endpoint=False)
        xx, pp = np.meshgrid(x, phi, indexing="ij")
        f, f_x, f_phi = self.perturbation(xx, pp)
        rho = p.arm_radius_mm + p.roughness_mm * f
        rho_x, rho_phi = p.roughness_mm * f_x, p.roughness_mm * f_phi
        s, c = np.sin(pp), np.cos(pp)
        points = np.stack([xx, rho * s, p.arm_radius_mm + rho * c], axis=-1)
        # d/dx x d/dphi of the parametrisation, pointing outwards
        normals = np.stack([-rho * rho_x, rho * s - rho_phi * c, rho * c + rho_phi * s], axis=-1)
        return points.reshape(-1, 3), normals.reshape(-1, 3)

    def _slab_surface(self, step: float) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        p = self.params
        half_width = p.arm_radius_mm
        x = np.arange(-self.half_length, self.half_length + 1e-9, step)
        y = np.arange(-half_width, half_width + 1e-9, step)
        xx, yy = np.meshgrid(x, y, indexing="ij")
        f, f_x, f_y = self.perturbation(xx, yy)
        top = half_width + p.roughness_mm * f
        top_points = np.stack([xx, yy, top], axis=-1).reshape(-1, 3)
        top_normals = np.stack(
            [-p.roughness_mm * f_x, -p.roughness_mm * f_y, np.ones_like(f)], axis=-1
        ).reshape(-1, 3)

        layers = max(int(np.ceil(half_width / step)), 1)
        fractions = np.arange(layers) / layers
        sides_points, sides_normals = [top_points], [top_normals]
        for sign in (-1.0, 1.0):
            edge = half_width + p.roughness_mm * self.perturbation(x, np.full_like(x, sign * half_width))[0]
            xs, ks = np.meshgrid(x, fractions, indexing="ij")
            zs = ks * edge[:, None]
            side = np.stack([xs, np.full_like(xs, sign * half_width), zs], axis=-1).reshape(-1, 3)
            sides_points.append(side)
            sides_normals.append(np.tile([0.0, sign, 0.0], (len(side), 1)))
        return np.vstack(sides_points), np.vstack(sides_normals)

    def surface_samples(self, step: float | None = None) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Local surface points and unit outward normals; ``step`` overrides the configured sampling."""
        p = self.params
        if p.shape == "tube":
            if step is None:
                points, normals = self._tube_surface(p.axial_step_mm, p.angular_samples)
            else:
                angular = max(int(np.ceil(2.0 * np.pi * p.arm_radius_mm / step)), 8)
                points, normals = self._tube_surface(step, angular)
        else:
            points, normals = self._slab_surface(p.axial_step_mm if step is None else step)
        normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
        return points, normals

    @cached_property
    def surface(self) -> PointCloud:
        return PointCloud(*self.surface_samples())

    @cached_property
    def camera_surface(self) -> PointCloud:
        return PointCloud(*self.surface_samples(min(CAMERA_SURFACE_STEP_MM, self.params.axial_step_mm)))

    @cached_property
    def artery(self) -> PointCloud:
        p = self.params
        x = np.arange(-self.half_length, self.half_length + 1e-9, p.axial_step_mm)
        angles = np.linspace(0.0, 2.0 * np.pi, ARTERY_RING_SAMPLES, endpoint=False)
        centers = self.vessel_center(x)
        ring = np.stack([np.zeros_like(angles), np.sin(angles), np.cos(angles)], axis=-1)
        points = (centers[:, None, :] + p.vessel_radius_mm * ring[None, :, :]).reshape(-1, 3)
        normals = np.broadcast_to(ring, (len(x), len(angles), 3)).reshape(-1, 3)
        return PointCloud(points, normals)


def validate_geometry(geometry: PhantomGeometry) -> None:
    """Raise InvalidArgumentError unless the vessel lies strictly inside the surface."""
    p = geometry.params
    if p.vessel_depth_mm + p.vessel_radius_mm >= p.arm_radius_mm:
        raise InvalidArgumentError(
            "vessel depth + vessel radius must be smaller than the arm radius",
            {"vessel_depth_mm": p.vessel_depth_mm, "vessel_radius_mm": p.vessel_radius_mm},
        )
    if p.vessel_depth_mm - p.roughness_mm <= p.vessel_radius_mm:
        raise InvalidArgumentError("the uneven surface would cut into the vessel")
    if p.shape == "slab" and p.vessel_wander_mm + p.vessel_radius_mm >= p.arm_radius_mm:
        raise InvalidArgumentError("vessel wander leaves the slab")

    step = min(p.axial_step_mm, 1.0)
    x = np.arange(-geometry.half_length, geometry.half_length + 1e-9, step)
    tree = cKDTree(geometry.vessel_center(x))
    clearance = float(tree.query(geometry.surface.points)[0].min())
    if clearance <= p.vessel_radius_mm:
        raise InvalidArgumentError(
            "vessel centerline too close to the surface",
            {"clearance_mm": clearance, "vessel_radius_mm": p.vessel_radius_mm},
        )


@dataclass(frozen=True, eq=False)
class Phantom:
    """Phantom geometry placed in the world by ``pose`` (local -> base)."""

    geometry: PhantomGeometry
    pose: RigidTransform

    @property
    def params(self) -> PhantomParams:
        return self.geometry.params

    @property
    def seed(self) -> int:
        return self.geometry.seed

    @property
    def vessel_radius(self) -> float:
        return self.params.vessel_radius_mm

    @property
    def roughness(self) -> float:
        return self.params.roughness_mm

    @property
    def centroid(self) -> Vec3:
        """Center of the arm's bounding volume in the base frame."""
        return self.pose.apply(np.array([0.0, 0.0, self.geometry.top_height / 2.0]))

    def moved(self, transform: RigidTransform) -> Phantom:
        return dataclasses.replace(self, pose=transform @ self.pose)

    def to_local(self, points: ArrayLike) -> NDArray[np.float64]:
        return self.pose.inverse().apply(np.asarray(points, dtype=np.float64))

    @property
    def surface(self) -> PointCloud:
        return self.geometry.surface.transformed(self.pose)

    @property
    def camera_surface(self) -> PointCloud:
        return self.geometry.camera_surface.transformed(self.pose)

    def centerline(self, step_mm: float = 1.0) -> NDArray[np.float64]:
        """Ground-truth vessel centerline in the base frame."""
        x = np.arange(-self.geometry.half_length, self.geometry.half_length + 1e-9, step_mm)
        return self.pose.apply(self.geometry.vessel_center(x))

    def inside(self, points: ArrayLike) -> NDArray[np.bool_]:
        points = np.asarray(points, dtype=np.float64)
        local = self.to_local(points.reshape(-1, 3)).reshape(points.shape)
        return self.geometry.inside(local)

    def vessel_distance(self, points: ArrayLike) -> NDArray[np.float64]:
        points = np.asarray(points, dtype=np.float64)
        local = self.to_local(points.reshape(-1, 3)).reshape(points.shape)
        return self.geometry.vessel_distance(local)

    def surface_entry(
        self,
        origins: ArrayLike,
        direction: ArrayLike,
        search_mm: float = CONTACT_SEARCH_MM,
    ) -> NDArray[np.float64]:
        """Signed distance t along ``direction`` from each origin to the first skin crossing.

        The segment [-search_mm, search_mm] is marched for the first
        outside -> inside transition, which is then bisected. NaN where the
        segment never enters the phantom.
        """
        origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
        direction = np.asarray(direction, dtype=np.float64)
        direction = direction / np.linalg.norm(direction)
        local_origins = self.to_local(origins)
        local_direction = self.pose.inverse().rotate(direction)

        steps = np.arange(-search_mm, search_mm + 1e-9, MARCH_STEP_MM)
        samples = local_origins[:, None, :] + steps[None, :, None] * local_direction
        inside = self.geometry.inside(samples)
        entering = ~inside[:, :-1] & inside[:, 1:]
        found = entering.any(axis=1)
        first = np.argmax(entering, axis=1)

        low = steps[first].astype(np.float64)
        high = steps[first + 1].astype(np.float64)
        for _ in range(BISECTION_STEPS):
            middle = 0.5 * (low + high)
            is_inside = self.geometry.inside(local_origins + middle[:, None] * local_direction)
            high = np.where(is_inside, middle, high)
            low = np.where(is_inside, low, middle)
        return np.where(found, high, np.nan)

    def template_cloud(self, count: int = TEMPLATE_POINT_COUNT) -> PointCloud:
        """Preoperative template in the local (CT) frame: the upper surface, Poisson-resampled."""
        surface = self.geometry.surface
        upper = surface.subset(np.flatnonzero(surface.normals[:, 2] > TEMPLATE_MIN_NORMAL_Z))
        return poisson_disc_sample_count(upper, count, seed=self.seed)

    def artery_cloud(self) -> PointCloud:
        """Vessel wall in the local (CT) frame."""
        return self.geometry.artery

    def export(self, directory: str | Path) -> dict[str, Path]:
        """Surface PLY and centerline CSV in the base frame."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        surface_path = write_ply(directory / "phantom_surface.ply", self.surface)
        centerline_path = directory / "centerline.csv"
        np.savetxt(centerline_path, self.centerline(), delimiter=",", header="x,y,z", comments="", fmt="%.17g")
        return {"surface": surface_path, "centerline": centerline_path}


def gen_phantom(seed: int, params: PhantomParams | None = None, pose: RigidTransform | None = None) -> Phantom:
    """Deterministic phantom for ``seed``; raises InvalidArgumentError on impossible geometry."""
    params = params or PhantomParams()
    geometry = PhantomGeometry.generate(params, seed)
    validate_geometry(geometry)
    phantom = Phantom(geometry, pose or RigidTransform.identity())
    logger.info(
        f"Generated {params.shape} phantom (seed={seed}, length={params.length_mm} mm, "
        f"{len(geometry.surface)} surface points)"
    )
    return phantom
