"""Common schemas for errors and rigid transforms"""

from typing import Any

from pydantic import BaseModel, model_validator

Vector3 = tuple[float, float, float]


class ErrorDetail(BaseModel):
    """Error detail structure"""
    code: str
    message: str
    details: dict[str, Any] | None = None


class TransformSpec(BaseModel):
    """Rigid transform as written in config files.

    Either a 4x4 homogeneous ``matrix`` or a 3x3 ``rotation`` plus ``translation`` (mm).
    """
    matrix: list[list[float]] | None = None
    rotation: list[list[float]] | None = None
    translation: Vector3 = (0.0, 0.0, 0.0)

    @model_validator(mode="after")
    def check_shape(self) -> "TransformSpec":
        if self.matrix is not None:
            if len(self.matrix) != 4 or any(len(row) != 4 for row in self.matrix):
                raise ValueError("matrix must be 4x4")
            if self.rotation is not None:
                raise ValueError("give either matrix or rotation, not both")
        if self.rotation is not None and (len(self.rotation) != 3 or any(len(row) != 3 for row in self.rotation)):
            raise ValueError("rotation must be 3x3")
        return self
