"""Assemble a solvable contact model from a validated run configuration."""

from dataclasses import dataclass, replace
from typing import Dict

import numpy as np
import structlog

from mpjr.core.exceptions import ConfigError
from mpjr.schemas.grid import GridKind, PhaseMask, ScanGrid
from mpjr.schemas.material import Material
from mpjr.schemas.run import LoadPath, RunConfig
from mpjr.services import afm_ingest
from mpjr.services.bulk_fem import assign_phases, generate_mesh_2d, generate_mesh_3d, phase_fractions
from mpjr.services.mpjr_element import build_interface_layer, default_initial_gap
from mpjr.services.solver import ContactSystem

logger = structlog.get_logger()

SCAN_KINDS = (GridKind.HEIGHT, GridKind.PEAK_FORCE, GridKind.DISSIPATION, GridKind.MODULUS)
EXTENT_RTOL = 1e-6


@dataclass(frozen=True)
class ContactModel:
    """Everything a run needs: the system, its load path and the processed scans."""

    config: RunConfig
    system: ContactSystem
    path: LoadPath
    grids: Dict[GridKind, ScanGrid]
    mask: PhaseMask
    h_rms: float
    g0: float
    k_cap: float
    bulk_fractions: np.ndarray


def load_scans(config: RunConfig) -> Dict[GridKind, ScanGrid]:
    """
    Read the four scans, then apply the configured preprocessing:
    composite topography, downsampling and (2D) profile extraction.
    """
    inputs = config.inputs
    grids = {
        kind: afm_ingest.load_scan_grid(getattr(inputs, kind.value), kind, getattr(inputs, f"{kind.value}_scale"))
        for kind in SCAN_KINDS
    }
    if inputs.counter_height is not None:
        counter = afm_ingest.load_scan_grid(inputs.counter_height, GridKind.HEIGHT, inputs.height_scale)
        grids[GridKind.HEIGHT] = afm_ingest.composite_topography(grids[GridKind.HEIGHT], counter)

    geometry = config.geometry
    grids = {kind: afm_ingest.downsample(grid, geometry.downsample) for kind, grid in grids.items()}

    if geometry.dim == 2:
        ny = grids[GridKind.HEIGHT].ny
        row = geometry.profile_row if geometry.profile_row is not None else ny // 2
        grids = {kind: afm_ingest.extract_profile(grid, row) for kind, grid in grids.items()}

    extent = grids[GridKind.HEIGHT].extent[0]
    if abs(extent - geometry.L) > EXTENT_RTOL * geometry.L:
        logger.warning("scan_extent_mismatch", scan_extent=extent, L=geometry.L)
    return grids


def phase_materials(config: RunConfig, mask: PhaseMask) -> tuple:
    """Matrix and inclusion materials; unset moduli fall back to the phase means of the map."""
    material = config.material
    E1 = material.E1 if material.E1 is not None else mask.matrix_mean
    E2 = material.E2 if material.E2 is not None else mask.inclusion_mean
    if E1 is None and E2 is None:
        raise ConfigError("material.E1", "no phase modulus given and the modulus map is empty")
    E1 = E1 if E1 is not None else E2
    E2 = E2 if E2 is not None else E1
    return (
        Material(E=E1, nu=material.nu, phase="matrix"),
        Material(E=E2, nu=material.nu, phase="inclusion"),
    )


def build_model(config: RunConfig, penalty_mode: bool = False, homogenized: bool = False) -> ContactModel:
    """
    Build mesh, interface layer and constraints.

    The CLI flags switch on penalty mode / homogenized bulk in addition to
    the config values.
    """
    geometry, law, material = config.geometry, config.law, config.material
    penalty_mode = penalty_mode or law.penalty_mode
    homogenized = homogenized or material.homogenized
    if geometry.dim == 3 and not homogenized:
        raise ConfigError("material.homogenized", "3D runs require the homogenized bulk")

    grids = load_scans(config)
    mask = afm_ingest.segment_phases(grids[GridKind.MODULUS], material.threshold)
    matrix, inclusion = phase_materials(config, mask)

    e_star = material.E_star
    if e_star is None:
        e_star = afm_ingest.effective_modulus([
            (mask.matrix_fraction, matrix.E),
            (mask.inclusion_fraction, inclusion.E),
        ])

    if geometry.dim == 2:
        mesh = generate_mesh_2d(geometry.L, geometry.t, geometry.n_surface, geometry.grading, geometry.n_layers)
    else:
        mesh = generate_mesh_3d(geometry.L, geometry.t, geometry.n_surface, geometry.grading, geometry.n_layers)
    mesh = assign_phases(mesh, mask, (matrix, inclusion), homogenized=homogenized, e_star=e_star)
    bulk_fractions = phase_fractions(mesh)

    k_cap = law.k_cap if law.k_cap is not None else law.k_t * e_star / geometry.L
    height, peak_force, dissipation = grids[GridKind.HEIGHT], grids[GridKind.PEAK_FORCE], grids[GridKind.DISSIPATION]
    layer = build_interface_layer(
        mesh,
        height,
        peak_force,
        dissipation,
        k_cap,
        g_init=law.g_init,
        quadrature=law.quadrature,
        uniform_adhesion=law.uniform_adhesion,
        penalty=penalty_mode
    )
    system = ContactSystem(mesh=replace(mesh, interface=layer), reference_modulus=e_star)

    h_rms = afm_ingest.surface_statistics(height).h_rms
    g0 = default_initial_gap(peak_force, dissipation)
    scales = {"hrms": h_rms, "g0": g0, "absolute": 1.0}
    scale = scales[config.load.reference]
    if not scale > 0:
        raise ConfigError("load.reference", f"reference length '{config.load.reference}' is zero for these scans")

    logger.info(
        "model_built",
        dim=geometry.dim,
        dofs=mesh.n_dofs,
        e_star=e_star,
        k_cap=k_cap,
        h_rms=h_rms,
        g0=g0,
        bulk_fractions=bulk_fractions.tolist(),
        penalty=penalty_mode,
        homogenized=homogenized
    )
    return ContactModel(
        config=config,
        system=system,
        path=LoadPath(ramps=config.load.ramps, scale=scale),
        grids=grids,
        mask=mask,
        h_rms=h_rms,
        g0=g0,
        k_cap=k_cap,
        bulk_fractions=bulk_fractions
    )
