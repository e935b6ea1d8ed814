"""Shared fixtures: grid files, small meshes and strip systems."""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pytest
import structlog

from mpjr.schemas.grid import GridKind
from mpjr.schemas.material import Material
from mpjr.services.afm_ingest import make_grid
from mpjr.services.bulk_fem import generate_mesh_2d, generate_mesh_3d
from mpjr.services.interface_law import G0_FACTOR, derive_params
from mpjr.services.mpjr_element import build_interface_layer
from mpjr.services.solver import ContactSystem


@pytest.fixture(autouse=True)
def reset_logging():
    """Drop logging configured by CLI tests (it holds captured streams)."""
    yield
    structlog.reset_defaults()
    logging.getLogger().handlers.clear()
    logging.captureWarnings(False)


def write_grid_file(path: Path, values, dx: float = 1.0, dy: float = 1.0, kind: str = "height", unit: str = "nm") -> Path:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    ny, nx = values.shape
    lines = [f"{nx} {ny}", f"{dx!r} {dy!r}", kind, unit]
    lines += [" ".join(repr(float(v)) for v in row) for row in values]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def grid_file(tmp_path) -> Callable[..., Path]:
    """Factory writing an ASCII scan grid into tmp_path."""
    def _write(name: str, values, dx: float = 1.0, dy: float = 1.0, kind: str = "height", unit: str = "nm") -> Path:
        return write_grid_file(tmp_path / name, values, dx, dy, kind, unit)
    return _write


@pytest.fixture
def unit_law():
    """Law for delta_gamma = p_max = 1 with a cap inside the feasible window."""
    g0 = G0_FACTOR
    return derive_params(1.0, 1.0, 40.0 / g0 ** 2)


def profile_grids(z, peak_force, dissipation, dx):
    """Height / peak-force / dissipation profiles (ny = 1) from per-sample arrays."""
    n = len(z)
    return (
        make_grid(np.asarray(z, dtype=float)[None, :], dx, dx, GridKind.HEIGHT),
        make_grid(np.broadcast_to(peak_force, (n,))[None, :], dx, dx, GridKind.PEAK_FORCE),
        make_grid(np.broadcast_to(dissipation, (n,))[None, :], dx, dx, GridKind.DISSIPATION),
    )


def build_strip(
    n_surface: int = 4,
    L: float = 1.0,
    t: float = 0.2,
    E: float = 100.0,
    nu: float = 0.0,
    p_max=1.0,
    delta_gamma=1.0,
    kappa: float = 40.0,
    z=None,
    n_layers: int = 1,
    grading: float = 1.0,
    penalty: bool = False,
    g_init: Optional[float] = None,
    quadrature: str = "nodal",
    k_cap: Optional[float] = None,
    materials=None
) -> ContactSystem:
    """
    2D strip with one interface element per surface column.

    Scalar p_max / delta_gamma give a uniform law; arrays give one value per
    surface node. k_cap defaults to kappa * delta_gamma / g0^2 of the mean law.
    """
    n_samples = n_surface + 1
    z = np.zeros(n_samples) if z is None else np.asarray(z, dtype=float)
    height, peak, diss = profile_grids(z, p_max, delta_gamma, L / n_surface)
    if k_cap is None:
        dg_mean, p_mean = float(np.mean(delta_gamma)), float(np.mean(p_max))
        g0 = G0_FACTOR * dg_mean / p_mean
        k_cap = kappa * dg_mean / g0 ** 2
    mesh = generate_mesh_2d(L, t, n_surface, grading, n_layers, material=Material(E=E, nu=nu))
    if materials is not None:
        mesh = replace(mesh, materials=materials[0], element_material=materials[1])
    layer = build_interface_layer(mesh, height, peak, diss, k_cap, g_init=g_init, quadrature=quadrature, penalty=penalty)
    return ContactSystem(mesh=replace(mesh, interface=layer), reference_modulus=E)


@pytest.fixture
def strip() -> Callable[..., ContactSystem]:
    return build_strip


@pytest.fixture
def block():
    """Small 3D block: 2 x 2 surface elements, flat, uniform law."""
    def _build(n_surface: int = 2, L: float = 1.0, depth: float = 0.2, E: float = 100.0, penalty: bool = False):
        n = n_surface + 1
        values = np.zeros((n, n))
        dx = L / n_surface
        height = make_grid(values, dx, dx, GridKind.HEIGHT)
        peak = make_grid(values + 1.0, dx, dx, GridKind.PEAK_FORCE)
        diss = make_grid(values + 1.0, dx, dx, GridKind.DISSIPATION)
        mesh = generate_mesh_3d(L, depth, n_surface, 1.0, 1, material=Material(E=E, nu=0.3))
        k_cap = 40.0 / G0_FACTOR ** 2
        layer = build_interface_layer(mesh, height, peak, diss, k_cap, penalty=penalty)
        return ContactSystem(mesh=replace(mesh, interface=layer), reference_modulus=E)
    return _build


@pytest.fixture
def scan_files(grid_file):
    """Four consistent 3 x 9 scans (nm-free, already in solver units) on a 1 mm strip."""
    x = np.linspace(0.0, 1.0, 9)
    rows = np.vstack([0.01 * np.sin(2 * np.pi * x + k) for k in range(3)])
    dx = 1.0 / 8
    modulus = np.where(np.arange(9) % 4 < 2, 128.0, 64.0)
    return {
        "height": grid_file("height.txt", rows - rows.min(), dx, dx, "height"),
        "peak_force": grid_file("peak.txt", np.full((3, 9), 1.0), dx, dx, "peak_force"),
        "dissipation": grid_file("diss.txt", np.full((3, 9), 1e-2), dx, dx, "dissipation"),
        "modulus": grid_file("modulus.txt", np.tile(modulus, (3, 1)), dx, dx, "modulus"),
    }


@pytest.fixture
def config_file(tmp_path, scan_files):
    """Factory for a minimal run config text plus extra lines."""
    def _write(*extra: str, name: str = "run.cfg") -> Path:
        lines = [f"inputs.{key} = {path}" for key, path in scan_files.items()]
        lines += list(extra)
        path = tmp_path / name
        path.write_text("# test run\n" + "\n".join(lines) + "\n")
        return path
    return _write
