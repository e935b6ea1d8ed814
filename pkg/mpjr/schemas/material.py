"""Pydantic schema for bulk materials."""

from pydantic import BaseModel, ConfigDict, Field


class Material(BaseModel):
    """Isotropic linear-elastic phase."""

    model_config = ConfigDict(frozen=True)

    E: float = Field(..., gt=0, description="Elastic modulus (MPa)")
    nu: float = Field(0.32, ge=0, lt=0.5, description="Poisson ratio")
    phase: str = "matrix"
