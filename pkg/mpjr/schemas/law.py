"""Pydantic schemas for interface constitutive laws."""

from pydantic import BaseModel, ConfigDict, Field, model_validator


class LJLawParams(BaseModel):
    """
    Regularized Lennard-Jones traction-gap law of one integration point.

    Tractions are positive when attractive. The law is linear below g_n0,
    follows p_n = a2*g^b2 - a1*g^b1 up to g_nc1, decays linearly to zero at
    g_nc2 and vanishes beyond.
    """

    model_config = ConfigDict(frozen=True)

    delta_gamma: float = Field(..., gt=0, description="Adhesion energy per unit area")
    p_max: float = Field(..., gt=0, description="Maximum adhesive traction")
    g0: float = Field(..., gt=0, description="Equilibrium spacing")
    g_max: float = Field(..., gt=0, description="Gap of the traction peak")
    a1: float = Field(..., gt=0)
    a2: float = Field(..., gt=0)
    b1: float = -9.0
    b2: float = -3.0
    g_n0: float = Field(..., gt=0, description="Switch gap of the repulsive branch")
    k_reg: float = Field(..., gt=0, description="Slope of the repulsive branch")
    g_nc1: float = Field(..., gt=0, description="Start of the attractive tail")
    g_nc2: float = Field(..., gt=0, description="Cutoff gap")
    area_total: float = Field(..., gt=0, description="Signed area of the law over [g_n0, inf)")

    @model_validator(mode="after")
    def validate_breakpoints(self) -> "LJLawParams":
        """Breakpoints must be strictly ordered."""
        if not (0.0 < self.g_n0 < self.g0 < self.g_max < self.g_nc1 < self.g_nc2):
            raise ValueError("breakpoints must satisfy 0 < g_n0 < g0 < g_max < g_nc1 < g_nc2")
        return self


class PenaltyLaw(BaseModel):
    """Adhesion-free comparison law: repulsive penalty below zero gap."""

    model_config = ConfigDict(frozen=True)

    k_pen: float = Field(..., gt=0, description="Penalty stiffness (traction/length)")
