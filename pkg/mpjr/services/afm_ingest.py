"""
AFM scan ingestion: parsing, unit conversion and preprocessing of gridded fields.

Grid file format (ASCII):

    # optional leading comment lines (config hash of the writing run)
    nx ny
    dx dy
    kind
    unit (free text)
    ny rows of nx whitespace-separated values, row 0 at the y origin
"""

import math
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
import structlog
from pydantic import ValidationError

from mpjr.config import settings
from mpjr.core.exceptions import (
    GridDataError,
    GridParseError,
    OutputError,
    PhaseFractionError,
    ProfileIndexError,
)
from mpjr.schemas.grid import GridKind, PhaseMask, ScanGrid, SurfaceStats

logger = structlog.get_logger()

HEADER_LINES = 4
FRACTION_SUM_TOL = 1e-12

PathLike = Union[str, Path]


def make_grid(
    values: np.ndarray,
    dx: float,
    dy: float,
    kind: GridKind,
    unit_scale: float = 1.0,
    unit: str = ""
) -> ScanGrid:
    """
    Build a grid from raw (already scaled) values.

    Height fields are shifted so the deepest valley is the datum.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    _check_finite(values)
    kind = GridKind(kind)
    if kind == GridKind.HEIGHT:
        values = values - values.min()
    try:
        return ScanGrid(
            nx=values.shape[1],
            ny=values.shape[0],
            dx=dx,
            dy=dy,
            values=values,
            kind=kind,
            unit_scale=unit_scale,
            unit=unit
        )
    except ValidationError as e:
        raise GridDataError(f"invalid {kind.value} grid: {e.errors()[0]['msg']}")


def _check_finite(values: np.ndarray):
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        j, i = (int(k) for k in bad[0])
        raise GridDataError("non-finite value", index=(i, j))


def _parse_numbers(path: str, line_no: int, line: str, count: int, cast=float) -> list:
    tokens = line.split()
    if len(tokens) != count:
        raise GridParseError(path, line_no, f"expected {count} values, found {len(tokens)}")
    try:
        return [cast(token) for token in tokens]
    except ValueError:
        raise GridParseError(path, line_no, f"could not parse '{line.strip()}'")


def load_scan_grid(path: PathLike, kind: GridKind, unit_scale: float = 1.0) -> ScanGrid:
    """
    Load an ASCII scan grid and convert it to solver units.

    Values are multiplied by `unit_scale`; height fields are re-datumed so
    min = 0.
    """
    if unit_scale <= 0:
        raise GridDataError("unit_scale must be > 0", details={"unit_scale": unit_scale})
    path = str(path)
    kind = GridKind(kind)

    with open(path, "r") as f:
        lines = f.read().splitlines()

    skip = 0
    while skip < len(lines) and lines[skip].startswith("#"):
        skip += 1
    lines = lines[skip:]

    if len(lines) < HEADER_LINES:
        raise GridParseError(path, skip + len(lines) + 1, "truncated header")

    nx, ny = _parse_numbers(path, skip + 1, lines[0], 2, int)
    if nx < 2 or ny < 1:
        raise GridParseError(path, skip + 1, f"invalid grid size {nx} x {ny}")
    dx, dy = _parse_numbers(path, skip + 2, lines[1], 2)
    if not (dx > 0 and dy > 0):
        raise GridParseError(path, skip + 2, "grid spacing must be positive")
    declared = lines[2].strip()
    if declared != kind.value:
        raise GridParseError(path, skip + 3, f"file declares kind '{declared}', expected '{kind.value}'")
    unit = lines[3].strip()

    body = lines[HEADER_LINES:]
    # Trailing blank lines are tolerated
    while body and not body[-1].strip():
        body.pop()
    if len(body) != ny:
        raise GridParseError(path, skip + HEADER_LINES + len(body) + 1, f"expected {ny} data rows, found {len(body)}")

    values = np.empty((ny, nx))
    for j, line in enumerate(body):
        values[j] = _parse_numbers(path, skip + HEADER_LINES + j + 1, line, nx)

    grid = make_grid(values * unit_scale, dx, dy, kind, unit_scale=unit_scale, unit=unit)
    logger.info(
        "scan_grid_loaded",
        path=path,
        kind=kind.value,
        nx=nx,
        ny=ny,
        unit_scale=unit_scale
    )
    return grid


def _write_hash(f: TextIO, config_hash: Optional[str]):
    if config_hash:
        f.write(f"# config_hash: {config_hash}\n")


def save_scan_grid(grid: ScanGrid, path: PathLike, config_hash: Optional[str] = None):
    """Write a grid in the ASCII grid format (values in solver units)."""
    fmt = settings.format_float
    try:
        with open(path, "w") as f:
            _write_hash(f, config_hash)
            f.write(f"{grid.nx} {grid.ny}\n")
            f.write(f"{fmt(grid.dx)} {fmt(grid.dy)}\n")
            f.write(f"{grid.kind.value}\n")
            f.write(f"{grid.unit}\n")
            for row in grid.values:
                f.write(" ".join(fmt(v) for v in row) + "\n")
    except OSError as e:
        raise OutputError(str(path), str(e))


def export_grid_csv(grid: ScanGrid, path: PathLike, config_hash: Optional[str] = None):
    """Write a grid as CSV rows `i,j,x,y,value`."""
    fmt = settings.format_float
    try:
        with open(path, "w") as f:
            _write_hash(f, config_hash)
            f.write("i,j,x,y,value\n")
            for j in range(grid.ny):
                for i in range(grid.nx):
                    f.write(f"{i},{j},{fmt(i * grid.dx)},{fmt(j * grid.dy)},{fmt(grid.values[j, i])}\n")
    except OSError as e:
        raise OutputError(str(path), str(e))


def export_phase_mask_csv(mask: PhaseMask, dx: float, dy: float, path: PathLike, config_hash: Optional[str] = None):
    """Write phase labels as CSV rows `i,j,x,y,label`."""
    fmt = settings.format_float
    try:
        with open(path, "w") as f:
            _write_hash(f, config_hash)
            f.write("i,j,x,y,label\n")
            for (j, i), label in np.ndenumerate(mask.labels):
                f.write(f"{i},{j},{fmt(i * dx)},{fmt(j * dy)},{int(label)}\n")
    except OSError as e:
        raise OutputError(str(path), str(e))


def _rebuild(grid: ScanGrid, values: np.ndarray, dx: float, dy: float) -> ScanGrid:
    return make_grid(values, dx, dy, grid.kind, unit_scale=grid.unit_scale, unit=grid.unit)


def extract_profile(grid: ScanGrid, row_index: int) -> ScanGrid:
    """Select row `row_index` as a 1 x nx profile (height profiles are re-datumed)."""
    if not 0 <= row_index < grid.ny:
        raise ProfileIndexError(row_index, grid.ny)
    return _rebuild(grid, grid.values[row_index:row_index + 1, :], grid.dx, grid.dy)


def downsample(grid: ScanGrid, factor: int) -> ScanGrid:
    """
    Keep every `factor`-th sample in each direction (indices 0, f, 2f, ...).

    No averaging: spikes of the scan survive at reduced resolution.
    """
    if factor < 1:
        raise GridDataError("downsample factor must be >= 1", details={"factor": factor})
    if factor == 1:
        return grid
    values = grid.values[::factor, ::factor]
    if values.shape[1] < 2:
        raise GridDataError("downsampling leaves fewer than 2 samples per row", details={"factor": factor})
    return _rebuild(grid, values, grid.dx * factor, grid.dy * factor)


def surface_statistics(grid: ScanGrid) -> SurfaceStats:
    """Mean, RMS deviation and peak-to-valley range of a field (two-pass)."""
    values = grid.values
    mean = float(values.mean())
    h_rms = float(np.sqrt(np.mean((values - mean) ** 2)))
    return SurfaceStats(
        mean=mean,
        h_rms=h_rms,
        h_max=float(values.max() - values.min()),
        min=float(values.min()),
        max=float(values.max())
    )


def composite_topography(first: ScanGrid, second: ScanGrid) -> ScanGrid:
    """
    Gap elevation of two facing rough surfaces, as seen by a rigid flat.

    Both fields are measured from their own deepest valley; the sum is
    re-datumed.
    """
    if first.values.shape != second.values.shape:
        raise GridDataError(
            "composite topography needs grids of equal shape",
            details={"first": first.values.shape, "second": second.values.shape}
        )
    combined = (first.values - first.values.min()) + (second.values - second.values.min())
    return make_grid(combined, first.dx, first.dy, GridKind.HEIGHT, unit=first.unit)


def averaged(grid: ScanGrid) -> ScanGrid:
    """Constant grid holding the field mean (homogeneous-law comparison)."""
    values = np.full_like(grid.values, grid.values.mean())
    return _rebuild(grid, values, grid.dx, grid.dy)


def segment_phases(modulus: ScanGrid, threshold: float) -> PhaseMask:
    """
    Label samples softer than `threshold` as inclusion (1), the rest as matrix (0).

    Per-phase mean moduli and area fractions are attached to the mask.
    """
    if modulus.kind != GridKind.MODULUS:
        raise GridDataError(f"phase segmentation needs a modulus grid, got {modulus.kind.value}")
    if not threshold > 0:
        raise GridDataError("threshold must be > 0", details={"threshold": threshold})

    labels = (modulus.values < threshold).astype(np.int8)
    total = labels.size
    n_inclusion = int(labels.sum())
    inclusion_fraction = n_inclusion / total
    matrix_fraction = 1.0 - inclusion_fraction

    inclusion_mean = float(modulus.values[labels == 1].mean()) if n_inclusion else None
    matrix_mean = float(modulus.values[labels == 0].mean()) if n_inclusion < total else None

    logger.info(
        "phases_segmented",
        threshold=threshold,
        inclusion_fraction=inclusion_fraction,
        matrix_mean=matrix_mean,
        inclusion_mean=inclusion_mean
    )
    return PhaseMask(
        nx=modulus.nx,
        ny=modulus.ny,
        labels=labels,
        threshold=threshold,
        matrix_fraction=matrix_fraction,
        inclusion_fraction=inclusion_fraction,
        matrix_mean=matrix_mean,
        inclusion_mean=inclusion_mean
    )


def effective_modulus(phase_moduli: Iterable[Tuple[float, float]]) -> float:
    """Mixture rule: sum of fraction_i * E_i over the phases."""
    phases: Sequence[Tuple[float, float]] = list(phase_moduli)
    if not phases:
        raise PhaseFractionError("at least one phase is required")
    for fraction, modulus in phases:
        if fraction < 0:
            raise PhaseFractionError("phase fractions must be >= 0", details={"fraction": fraction})
        if not modulus > 0:
            raise PhaseFractionError("phase moduli must be > 0", details={"modulus": modulus})

    total = math.fsum(fraction for fraction, _ in phases)
    if abs(total - 1.0) > FRACTION_SUM_TOL:
        raise PhaseFractionError(f"phase fractions sum to {total!r}, expected 1", details={"sum": total})
    return math.fsum(fraction * modulus for fraction, modulus in phases)
