"""Pydantic schemas for run configuration, load paths and solver histories."""

import math
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _split_pairs(value: str) -> List[List[str]]:
    pairs = []
    for item in value.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 2:
            raise ValueError(f"expected 'a:b' pairs, got '{item}'")
        pairs.append([p.strip() for p in parts])
    return pairs


class Section(BaseModel):
    """Straight line of integration points: `axis` held at position * L."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    axis: Literal["x", "y"] = "x"
    position: float = Field(0.5, ge=0.0, le=1.0)


class Ramp(BaseModel):
    """Linear leg of the load path, target in units of the load reference."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    target: float
    increments: int = Field(..., ge=1)

    @field_validator("target")
    @classmethod
    def validate_target(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("ramp target must be finite")
        return v


class InputsSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    height: str
    peak_force: str
    dissipation: str
    modulus: str
    counter_height: Optional[str] = None
    height_scale: float = Field(1.0, gt=0)
    peak_force_scale: float = Field(1.0, gt=0)
    dissipation_scale: float = Field(1.0, gt=0)
    modulus_scale: float = Field(1.0, gt=0)

    @field_validator("height", "peak_force", "dissipation", "modulus", "counter_height")
    @classmethod
    def validate_exists(cls, v: Optional[str]) -> Optional[str]:
        if v is not None and not Path(v).is_file():
            raise ValueError(f"file not found: {v}")
        return v


class GeometrySection(BaseModel):
    """Lengths in mm."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    dim: int = Field(2, ge=2, le=3)
    L: float = Field(5e-3, gt=0)
    t: float = Field(2e-4, gt=0)
    n_surface: int = Field(64, ge=2)
    grading: float = Field(1.0, ge=1.0)
    n_layers: int = Field(8, ge=1)
    profile_row: Optional[int] = Field(None, ge=0)
    downsample: int = Field(1, ge=1)


class MaterialSection(BaseModel):
    """Moduli in MPa; unset phase moduli come from the segmented modulus map."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    nu: float = Field(0.32, ge=0.0, lt=0.5)
    threshold: float = Field(72.44, gt=0)
    homogenized: bool = False
    E1: Optional[float] = Field(None, gt=0)
    E2: Optional[float] = Field(None, gt=0)
    E_star: Optional[float] = Field(None, gt=0)


class LawSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    k_t: float = Field(100.0, gt=0)
    k_cap: Optional[float] = Field(None, gt=0)
    g_init: Optional[float] = None
    penalty_mode: bool = False
    uniform_adhesion: bool = False
    quadrature: Literal["nodal", "gauss"] = "nodal"


class LoadSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    ramps: List[Ramp] = Field(
        default_factory=lambda: [Ramp(target=-3.0, increments=30), Ramp(target=1.0, increments=40)]
    )
    reference: Literal["hrms", "g0", "absolute"] = "hrms"

    @field_validator("ramps", mode="before")
    @classmethod
    def parse_ramps(cls, v):
        """Accept the `target:increments, ...` text form."""
        if isinstance(v, str):
            return [{"target": a, "increments": b} for a, b in _split_pairs(v)]
        return v

    @field_validator("ramps")
    @classmethod
    def validate_ramps(cls, v: List[Ramp]) -> List[Ramp]:
        if not v:
            raise ValueError("at least one ramp is required")
        return v


class SolverSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    tol_rel: float = Field(1e-8, gt=0)
    tol_abs: Optional[float] = Field(None, gt=0)
    max_iterations: int = Field(25, ge=1)
    max_depth: int = Field(10, ge=0)
    jump_tol: float = Field(0.25, gt=0)
    continue_on_snap: bool = False


class OutputSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    snapshot_every: int = Field(0, ge=0)
    sections: List[Section] = Field(default_factory=list)

    @field_validator("sections", mode="before")
    @classmethod
    def parse_sections(cls, v):
        """Accept the `axis:position, ...` text form."""
        if isinstance(v, str):
            return [{"axis": a, "position": b} for a, b in _split_pairs(v)]
        return v


class RunConfig(BaseModel):
    """Complete, validated description of one simulation."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    inputs: InputsSection
    geometry: GeometrySection = Field(default_factory=GeometrySection)
    material: MaterialSection = Field(default_factory=MaterialSection)
    law: LawSection = Field(default_factory=LawSection)
    load: LoadSection = Field(default_factory=LoadSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    output: OutputSection = Field(default_factory=OutputSection)


class LoadIncrement(BaseModel):
    model_config = ConfigDict(frozen=True)

    ramp: int
    pseudo_time: float
    u_bar: float


class LoadPath(BaseModel):
    """
    Piecewise-linear far-field displacement history starting at u_bar = 0.

    Targets are multiples of `scale` (h_rms, g0 or 1); negative u_bar pushes
    the indenter into the substrate.
    """

    model_config = ConfigDict(frozen=True)

    ramps: List[Ramp]
    scale: float = Field(1.0, gt=0)

    def increments(self) -> List[LoadIncrement]:
        """Every increment of every ramp; pseudo-time = ramp index + k/n."""
        steps = []
        start = 0.0
        for r, ramp in enumerate(self.ramps):
            for k in range(1, ramp.increments + 1):
                fraction = k / ramp.increments
                steps.append(LoadIncrement(
                    ramp=r,
                    pseudo_time=r + fraction,
                    u_bar=(start + (ramp.target - start) * fraction) * self.scale
                ))
            start = ramp.target
        return steps


class StepRecord(BaseModel):
    """One converged load increment."""

    model_config = ConfigDict(frozen=True)

    step: int = Field(..., ge=0)
    ramp: int = Field(..., ge=0)
    pseudo_time: float
    u_bar: float
    reaction_force: float
    stiffness: float = Field(..., description="Condensed dP/du_bar at the converged state")
    iterations: int = Field(..., ge=1)
    depth: int = Field(..., ge=0)


class FailureRecord(BaseModel):
    """A load increment abandoned after exhausting bisection."""

    model_config = ConfigDict(frozen=True)

    pseudo_time: float
    u_bar: float
    residual_norm: float
    depth: int


class Snapshot(BaseModel):
    """Field state of one converged step."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    step: int
    u: np.ndarray
    p_n: np.ndarray


class RunHistory(BaseModel):
    """Converged steps in strictly increasing pseudo-time."""

    h_rms: float = Field(0.0, ge=0)
    steps: List[StepRecord] = Field(default_factory=list)
    failures: List[FailureRecord] = Field(default_factory=list)
    snapshots: List[Snapshot] = Field(default_factory=list)
    jumps: List[int] = Field(default_factory=list)
    final: Optional[Snapshot] = None

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def validate_order(self) -> "RunHistory":
        times = [s.pseudo_time for s in self.steps]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("steps must be strictly ordered in pseudo-time")
        return self

    def record(self, step: StepRecord):
        if self.steps and step.pseudo_time <= self.steps[-1].pseudo_time:
            raise ValueError("steps must be strictly ordered in pseudo-time")
        self.steps.append(step)

    @property
    def u_bar(self) -> np.ndarray:
        return np.array([s.u_bar for s in self.steps])

    @property
    def reaction_force(self) -> np.ndarray:
        return np.array([s.reaction_force for s in self.steps])

    @property
    def peak_index(self) -> Optional[int]:
        """Step of the pull-off force (largest attractive P)."""
        if not self.steps:
            return None
        index = int(np.argmax(self.reaction_force))
        return index if self.steps[index].reaction_force > 0 else None

    @property
    def has_instability(self) -> bool:
        """Jump past the pull-off peak, or a failed step after it."""
        if self.jumps:
            return True
        peak = self.peak_index
        if peak is None:
            return False
        peak_time = self.steps[peak].pseudo_time
        return any(f.pseudo_time > peak_time for f in self.failures)

    def u_bar_over_hrms(self, u_bar: float) -> float:
        return u_bar / self.h_rms if self.h_rms > 0 else math.nan
