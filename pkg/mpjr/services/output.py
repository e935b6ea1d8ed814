"""
Result writers: CSV tables and legacy-VTK field files.

Floats are written with settings.OUTPUT_FLOAT_FORMAT (17 significant digits
by default, exact decimal round trip). When a config hash is given, CSV
files start with a `# config_hash: <hex>` line and VTK files carry it in
their title line.
"""

from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional, TextIO, Union

import numpy as np
import structlog

from mpjr.config import settings
from mpjr.core.exceptions import GeometryError, OutputError
from mpjr.schemas.law import LJLawParams
from mpjr.schemas.run import RunHistory
from mpjr.services.bulk_fem import element_stresses
from mpjr.services.interface_law import tangent, traction
from mpjr.services.solver import ContactSystem, interface_state

logger = structlog.get_logger()

PathLike = Union[str, Path]

HISTORY_HEADER = "step,pseudo_time,u_bar,u_bar_over_hrms,reaction_force"
SECTION_HEADER = "coord,z,g_n_star,p_n,p_n_over_Estar"
DUMP_HEADER = "element,point,x,y,z,delta_gamma,p_max,g_n_star,p_n,sample_i,sample_j"
LAW_HEADER = "g,p_n,dp_dg"

VTK_CELL_TYPES = {("bulk", 2): 9, ("bulk", 3): 12, ("interface", 2): 3, ("interface", 3): 9}
COORD_TOL = 1e-9


@contextmanager
def _csv(path: PathLike, header: str, config_hash: Optional[str]) -> Iterator[TextIO]:
    try:
        with open(path, "w") as f:
            if config_hash:
                f.write(f"# config_hash: {config_hash}\n")
            f.write(header + "\n")
            yield f
    except OSError as e:
        raise OutputError(str(path), str(e))


def _row(*values) -> str:
    fmt = settings.format_float
    return ",".join(v if isinstance(v, str) else str(v) if isinstance(v, (int, np.integer)) else fmt(v) for v in values) + "\n"


def write_history(history: RunHistory, path: PathLike, config_hash: Optional[str] = None):
    """Force-displacement curve, one row per converged step."""
    with _csv(path, HISTORY_HEADER, config_hash) as f:
        for s in history.steps:
            f.write(_row(s.step, s.pseudo_time, s.u_bar, history.u_bar_over_hrms(s.u_bar), s.reaction_force))
    logger.info("history_written", path=str(path), steps=len(history.steps))


def section_points(system: ContactSystem, axis: str, position: float) -> np.ndarray:
    """
    Flat indices of the integration points on a section line, ordered along it.

    In 3D the line holds `axis` at the largest point coordinate <= position * L
    (lower index on ties); in 2D it is the whole profile. Coincident points of
    neighbouring elements appear once.
    """
    if not 0.0 <= position <= 1.0:
        raise GeometryError("section position must lie in [0, 1]", details={"position": position})
    if axis not in ("x", "y"):
        raise GeometryError(f"unknown section axis '{axis}'")

    layer = system.layer
    coords = layer.ip_coords.reshape(-1, layer.dim)
    tol = COORD_TOL * system.mesh.length

    if layer.dim == 2:
        along = coords[:, 0]
        candidates = np.arange(len(coords))
    else:
        fixed_axis, along_axis = (0, 1) if axis == "x" else (1, 0)
        levels = np.unique(coords[:, fixed_axis])
        target = position * system.mesh.length
        level = levels[max(int(np.searchsorted(levels, target + tol, side="right")) - 1, 0)]
        candidates = np.flatnonzero(np.abs(coords[:, fixed_axis] - level) <= tol)
        along = coords[:, along_axis]

    order = candidates[np.argsort(along[candidates], kind="stable")]
    keep = np.concatenate([[True], np.diff(along[order]) > tol])
    return order[keep]


def write_section(
    system: ContactSystem,
    u: np.ndarray,
    axis: str,
    position: float,
    path: PathLike,
    config_hash: Optional[str] = None
):
    """Traction profile along a straight line of integration points."""
    points = section_points(system, axis, position)
    layer = system.layer
    state = interface_state(system, u)
    coords = layer.ip_coords.reshape(-1, layer.dim)
    along = 0 if layer.dim == 2 or axis == "y" else 1
    z = layer.z.ravel()
    g_star = state.g_n_star.ravel()
    p_n = state.p_n.ravel()
    with _csv(path, SECTION_HEADER, config_hash) as f:
        for k in points:
            f.write(_row(coords[k, along], z[k], g_star[k], p_n[k], p_n[k] / system.reference_modulus))
    logger.info("section_written", path=str(path), axis=axis, position=position, points=len(points))


def write_interface_dump(system: ContactSystem, u: np.ndarray, path: PathLike, config_hash: Optional[str] = None):
    """Every integration point: coordinates, embedded data, gap and traction."""
    layer = system.layer
    state = interface_state(system, u)
    if layer.is_penalty:
        delta_gamma = np.full(layer.z.shape, np.nan)
        p_max = delta_gamma
    else:
        delta_gamma, p_max = layer.law.delta_gamma, layer.law.p_max
    with _csv(path, DUMP_HEADER, config_hash) as f:
        for e in range(layer.n_elements):
            for q in range(layer.n_points):
                x = layer.ip_coords[e, q]
                y = x[1] if layer.dim == 3 else 0.0
                f.write(_row(
                    e, q, x[0], y, layer.z[e, q], delta_gamma[e, q], p_max[e, q],
                    state.g_n_star[e, q], state.p_n[e, q], *layer.ip_samples[e, q]
                ))


def write_law_curve(
    params: LJLawParams,
    path: PathLike,
    n_points: int = 400,
    config_hash: Optional[str] = None
):
    """Sample the regularized law from half the repulsive switch to past the cutoff."""
    g = np.linspace(0.5 * params.g_n0, 1.1 * params.g_nc2, n_points)
    p, dp = traction(params, g), tangent(params, g)
    with _csv(path, LAW_HEADER, config_hash) as f:
        for row in zip(g, p, dp):
            f.write(_row(*row))


def _stress_names(dim: int) -> List[str]:
    if dim == 2:
        return ["sigma_xx", "sigma_yy", "sigma_xy"]
    return ["sigma_xx", "sigma_yy", "sigma_zz", "sigma_xy", "sigma_yz", "sigma_xz"]


def write_fields(system: ContactSystem, u: np.ndarray, path: PathLike, config_hash: Optional[str] = None):
    """
    Legacy ASCII VTK unstructured grid.

    Cells: bulk quads/hexes, then the interface lines/quads on the lower
    faces. Point data: displacement. Cell data: modulus, phase (-1 on the
    interface), centroid stress (0 on the interface), mean p_n (0 in bulk).
    """
    mesh = system.mesh
    layer = system.layer
    fmt = settings.format_float
    dim = mesh.dim

    points = np.zeros((mesh.n_nodes, 3))
    points[:, :dim] = mesh.nodes
    disp = np.zeros((mesh.n_nodes, 3))
    disp[:, :dim] = np.asarray(u).reshape(mesh.n_nodes, dim)

    cells = [list(c) for c in mesh.elements] + [list(c) for c in layer.lower]
    types = [VTK_CELL_TYPES[("bulk", dim)]] * mesh.n_elements + [VTK_CELL_TYPES[("interface", dim)]] * layer.n_elements
    n_cells = len(cells)

    E, _ = mesh.element_moduli()
    modulus = np.concatenate([E, np.zeros(layer.n_elements)])
    phase = np.concatenate([mesh.element_material, -np.ones(layer.n_elements, dtype=int)])
    stress = np.vstack([element_stresses(mesh, u), np.zeros((layer.n_elements, 3 if dim == 2 else 6))])
    p_mean = np.concatenate([np.zeros(mesh.n_elements), interface_state(system, u).p_n.mean(axis=1)])

    title = "mpjr fields" + (f" config_hash={config_hash}" if config_hash else "")
    try:
        with open(path, "w") as f:
            f.write("# vtk DataFile Version 3.0\n")
            f.write(title + "\n")
            f.write("ASCII\n")
            f.write("DATASET UNSTRUCTURED_GRID\n")
            f.write(f"POINTS {mesh.n_nodes} double\n")
            for p in points:
                f.write(" ".join(fmt(v) for v in p) + "\n")
            f.write(f"CELLS {n_cells} {sum(len(c) + 1 for c in cells)}\n")
            for c in cells:
                f.write(f"{len(c)} " + " ".join(str(int(i)) for i in c) + "\n")
            f.write(f"CELL_TYPES {n_cells}\n")
            for t in types:
                f.write(f"{t}\n")

            f.write(f"POINT_DATA {mesh.n_nodes}\n")
            f.write("VECTORS displacement double\n")
            for d in disp:
                f.write(" ".join(fmt(v) for v in d) + "\n")

            f.write(f"CELL_DATA {n_cells}\n")
            f.write("SCALARS modulus double 1\nLOOKUP_TABLE default\n")
            for v in modulus:
                f.write(fmt(v) + "\n")
            f.write("SCALARS phase int 1\nLOOKUP_TABLE default\n")
            for v in phase:
                f.write(f"{int(v)}\n")
            for k, name in enumerate(_stress_names(dim)):
                f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in stress[:, k]:
                    f.write(fmt(v) + "\n")
            f.write("SCALARS p_n double 1\nLOOKUP_TABLE default\n")
            for v in p_mean:
                f.write(fmt(v) + "\n")
    except OSError as e:
        raise OutputError(str(path), str(e))
    logger.info("fields_written", path=str(path), points=mesh.n_nodes, cells=n_cells)
