"""Rigid transforms (SE(3)) used for every frame in the calibration chain."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.transform import Rotation

from app.schemas.common import TransformSpec
from app.utils.constants import ROTATION_TOLERANCE
from app.utils.errors import InvalidArgumentError

Vec3 = NDArray[np.float64]

# Drift above this triggers projection back onto SO(3) after composition.
_DRIFT_TOLERANCE = 1e-12


def as_vec3(value: ArrayLike) -> Vec3:
    """Convert to a finite float64 3-vector."""
    vec = np.asarray(value, dtype=np.float64).reshape(-1)
    if vec.shape != (3,):
        raise InvalidArgumentError(f"expected a 3-vector, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise InvalidArgumentError("vector components must be finite")
    return vec


def nearest_rotation(matrix: ArrayLike) -> NDArray[np.float64]:
    """Project a 3x3 matrix onto the closest proper rotation (SVD)."""
    u, _, vt = np.linalg.svd(np.asarray(matrix, dtype=np.float64))
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def _orthonormality_error(rotation: NDArray[np.float64]) -> float:
    return float(np.max(np.abs(rotation.T @ rotation - np.eye(3))))


def _frozen(array: NDArray[np.float64]) -> NDArray[np.float64]:
    array = np.array(array, dtype=np.float64, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation plus translation (mm); maps p to rotation @ p + translation."""

    rotation: NDArray[np.float64]
    translation: Vec3

    def __post_init__(self) -> None:
        rotation = np.asarray(self.rotation, dtype=np.float64)
        if rotation.shape != (3, 3) or not np.all(np.isfinite(rotation)):
            raise InvalidArgumentError("rotation must be a finite 3x3 matrix")
        if _orthonormality_error(rotation) > ROTATION_TOLERANCE:
            raise InvalidArgumentError(
                "rotation is not orthonormal",
                {"error": _orthonormality_error(rotation)},
            )
        if abs(np.linalg.det(rotation) - 1.0) > ROTATION_TOLERANCE:
            raise InvalidArgumentError("rotation must have determinant +1")
        object.__setattr__(self, "rotation", _frozen(rotation))
        object.__setattr__(self, "translation", _frozen(as_vec3(self.translation)))

    # Constructors

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, translation: ArrayLike) -> RigidTransform:
        return cls(np.eye(3), as_vec3(translation))

    @classmethod
    def from_matrix(cls, matrix: ArrayLike) -> RigidTransform:
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (4, 4):
            raise InvalidArgumentError(f"expected a 4x4 matrix, got shape {matrix.shape}")
        if not np.allclose(matrix[3], [0.0, 0.0, 0.0, 1.0]):
            raise InvalidArgumentError("last row of a homogeneous transform must be [0, 0, 0, 1]")
        return cls(matrix[:3, :3], matrix[:3, 3])

    @classmethod
    def from_rotvec(cls, rotvec: ArrayLike, translation: ArrayLike = (0.0, 0.0, 0.0)) -> RigidTransform:
        """Axis-angle rotation (radians) plus translation."""
        matrix = Rotation.from_rotvec(as_vec3(rotvec)).as_matrix()
        return cls(nearest_rotation(matrix), translation)

    @classmethod
    def from_euler(
        cls, seq: str, angles_deg: ArrayLike, translation: ArrayLike = (0.0, 0.0, 0.0)
    ) -> RigidTransform:
        matrix = Rotation.from_euler(seq, angles_deg, degrees=True).as_matrix()
        return cls(nearest_rotation(matrix), translation)

    @classmethod
    def from_quaternion(cls, quat_xyzw: ArrayLike, translation: ArrayLike = (0.0, 0.0, 0.0)) -> RigidTransform:
        matrix = Rotation.from_quat(np.asarray(quat_xyzw, dtype=np.float64)).as_matrix()
        return cls(nearest_rotation(matrix), translation)

    @classmethod
    def about_point(cls, rotation: NDArray[np.float64], pivot: ArrayLike, shift: ArrayLike) -> RigidTransform:
        """Rotate about ``pivot`` then translate by ``shift``."""
        pivot = as_vec3(pivot)
        return cls(rotation, pivot - rotation @ pivot + as_vec3(shift))

    @classmethod
    def random(cls, rng: np.random.Generator, max_translation: float = 100.0) -> RigidTransform:
        matrix = Rotation.random(random_state=rng).as_matrix()
        return cls(nearest_rotation(matrix), rng.uniform(-max_translation, max_translation, size=3))

    # Algebra

    def compose(self, other: RigidTransform) -> RigidTransform:
        """Return self ∘ other (apply ``other`` first)."""
        rotation = self.rotation @ other.rotation
        if _orthonormality_error(rotation) > _DRIFT_TOLERANCE:
            rotation = nearest_rotation(rotation)
        return RigidTransform(rotation, self.rotation @ other.translation + self.translation)

    def __matmul__(self, other: RigidTransform) -> RigidTransform:
        return self.compose(other)

    def inverse(self) -> RigidTransform:
        rotation_t = self.rotation.T
        return RigidTransform(rotation_t, -rotation_t @ self.translation)

    def apply(self, points: ArrayLike) -> NDArray[np.float64]:
        """Transform a single point (3,) or a batch (N, 3)."""
        points = np.asarray(points, dtype=np.float64)
        if points.ndim == 1:
            return self.rotation @ points + self.translation
        return points @ self.rotation.T + self.translation

    def rotate(self, vectors: ArrayLike) -> NDArray[np.float64]:
        """Rotate directions without translating them."""
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim == 1:
            return self.rotation @ vectors
        return vectors @ self.rotation.T

    # Conversions and metrics

    def as_matrix(self) -> NDArray[np.float64]:
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation
        matrix[:3, 3] = self.translation
        return matrix

    def as_quaternion(self) -> NDArray[np.float64]:
        """Quaternion in (x, y, z, w) order."""
        return Rotation.from_matrix(self.rotation).as_quat()

    def rotation_angle_deg(self) -> float:
        cos_angle = np.clip((np.trace(self.rotation) - 1.0) / 2.0, -1.0, 1.0)
        return float(np.degrees(np.arccos(cos_angle)))

    def angle_to(self, other: RigidTransform) -> float:
        """Rotation angle (degrees) between two orientations."""
        return (self.inverse() @ other).rotation_angle_deg()

    def distance_to(self, other: RigidTransform) -> float:
        return float(np.linalg.norm(self.translation - other.translation))

    def is_close(self, other: RigidTransform, atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, atol=atol)
            and np.allclose(self.translation, other.translation, atol=atol)
        )

    def with_translation(self, translation: ArrayLike) -> RigidTransform:
        return RigidTransform(self.rotation, translation)

    def __repr__(self) -> str:
        t = np.array2string(self.translation, precision=3)
        return f"RigidTransform(angle={self.rotation_angle_deg():.3f}deg, translation={t})"


def rot_x(angle_deg: float) -> NDArray[np.float64]:
    """Rotation matrix about the X axis."""
    angle = np.radians(angle_deg)
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_z(angle_deg: float) -> NDArray[np.float64]:
    """Rotation matrix about the Z axis."""
    angle = np.radians(angle_deg)
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def compose_all(transforms: Iterable[RigidTransform]) -> RigidTransform:
    """Compose left to right: compose_all([a, b, c]) == a ∘ b ∘ c."""
    result = RigidTransform.identity()
    for transform in transforms:
        result = result @ transform
    return result


def best_fit_transform(source: ArrayLike, target: ArrayLike) -> RigidTransform:
    """Least-squares rigid transform mapping ``source`` onto ``target`` (SVD, no scaling)."""
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.shape != target.shape or source.ndim != 2 or source.shape[1] != 3:
        raise InvalidArgumentError("best fit needs two (N, 3) arrays of equal shape")
    if len(source) == 0:
        raise InvalidArgumentError("best fit needs at least one point pair")

    centroid_s = source.mean(axis=0)
    centroid_t = target.mean(axis=0)
    h = (source - centroid_s).T @ (target - centroid_t)
    u, _, vt = np.linalg.svd(h)
    rotation = vt.T @ u.T

    # special reflection case
    if np.linalg.det(rotation) < 0:
        vt[2, :] *= -1
        rotation = vt.T @ u.T

    rotation = nearest_rotation(rotation)
    return RigidTransform(rotation, centroid_t - rotation @ centroid_s)


def transform_from_spec(spec: TransformSpec) -> RigidTransform:
    """Build a transform from its config-file form."""
    if spec.matrix is not None:
        return RigidTransform.from_matrix(spec.matrix)
    rotation = np.eye(3) if spec.rotation is None else np.asarray(spec.rotation, dtype=np.float64)
    # hand-written files round their entries
    if np.linalg.det(rotation) > 0 and _orthonormality_error(rotation) < 1e-4:
        rotation = nearest_rotation(rotation)
    return RigidTransform(rotation, spec.translation)


def transform_to_spec(transform: RigidTransform) -> TransformSpec:
    return TransformSpec(
        rotation=transform.rotation.tolist(),
        translation=tuple(float(v) for v in transform.translation),
    )
