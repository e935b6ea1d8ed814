"""Pydantic schemas for scan grids and phase masks."""

from enum import Enum
from typing import ClassVar, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class GridKind(str, Enum):
    """Scalar surface field carried by a scan grid."""
    HEIGHT = "height"
    PEAK_FORCE = "peak_force"
    DISSIPATION = "dissipation"
    MODULUS = "modulus"


def _readonly(values: np.ndarray) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True)
    array.flags.writeable = False
    return array


class ScanGrid(BaseModel):
    """
    Uniform raster of one scalar surface field.

    `values` has shape (ny, nx): row j is the line y = j*dy, row 0 at the
    y origin. Profiles extracted from a map have ny = 1.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    nx: int = Field(..., ge=2)
    ny: int = Field(..., ge=1)
    dx: float = Field(..., gt=0)
    dy: float = Field(..., gt=0)
    values: np.ndarray
    kind: GridKind
    unit_scale: float = Field(1.0, gt=0)
    unit: str = ""

    @field_validator("values")
    @classmethod
    def validate_values(cls, v: np.ndarray) -> np.ndarray:
        """Store a read-only float copy; every entry must be finite."""
        v = _readonly(v)
        if v.ndim != 2:
            raise ValueError("values must be a 2D array (ny, nx)")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        return v

    @model_validator(mode="after")
    def validate_field(self) -> "ScanGrid":
        """Check shape and the per-kind value ranges."""
        if self.values.shape != (self.ny, self.nx):
            raise ValueError(f"values shape {self.values.shape} does not match (ny, nx) = ({self.ny}, {self.nx})")
        if self.kind == GridKind.HEIGHT and self.values.min() != 0.0:
            raise ValueError("height datum must sit at the deepest valley (min = 0)")
        if self.kind in (GridKind.PEAK_FORCE, GridKind.DISSIPATION) and self.values.min() < 0.0:
            raise ValueError(f"{self.kind.value} values must be >= 0")
        if self.kind == GridKind.MODULUS and self.values.min() <= 0.0:
            raise ValueError("modulus values must be > 0")
        return self

    @property
    def is_profile(self) -> bool:
        """True for a single extracted line."""
        return self.ny == 1

    @property
    def extent(self) -> tuple[float, float]:
        """Physical side lengths (x, y) spanned by the samples."""
        return (self.nx - 1) * self.dx, max(self.ny - 1, 0) * self.dy


class SurfaceStats(BaseModel):
    """Summary statistics of a height field."""
    mean: float
    h_rms: float
    h_max: float
    min: float
    max: float


class PhaseMask(BaseModel):
    """Binary phase labels obtained by thresholding a modulus map."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    MATRIX: ClassVar[int] = 0
    INCLUSION: ClassVar[int] = 1

    nx: int
    ny: int
    labels: np.ndarray
    threshold: float = Field(..., gt=0)
    matrix_fraction: float
    inclusion_fraction: float
    matrix_mean: Optional[float] = None
    inclusion_mean: Optional[float] = None

    @field_validator("labels")
    @classmethod
    def validate_labels(cls, v: np.ndarray) -> np.ndarray:
        """Labels are a read-only binary integer array."""
        v = np.array(v, dtype=np.int8, copy=True)
        if not np.isin(v, (0, 1)).all():
            raise ValueError("labels must be 0 (matrix) or 1 (inclusion)")
        v.flags.writeable = False
        return v

    @model_validator(mode="after")
    def validate_shape(self) -> "PhaseMask":
        """Labels must cover the source grid."""
        if self.labels.shape != (self.ny, self.nx):
            raise ValueError("labels shape does not match (ny, nx)")
        return self
