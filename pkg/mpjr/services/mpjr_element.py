"""
Zero-thickness interface elements with embedded roughness.

The interface mesh stays flat; the AFM elevation z of every integration
point enters the law through the modified gap g* = g_n + z. Each element
pairs a lower face (top surface of the bulk) with an upper face (indenter
side). Only the normal gap produces tractions.

The layer is stored batched: one row per element, one column per
integration point. `MpjrElement` is a view on one row and is evaluated by
the same kernels.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
import structlog

from mpjr.core.exceptions import GridDataError, ResolutionMismatchError
from mpjr.schemas.grid import GridKind, ScanGrid
from mpjr.schemas.law import PenaltyLaw
from mpjr.services.bulk_fem import GAUSS_1D, Mesh, natural_nodes, shape_functions
from mpjr.services.interface_law import (
    G0_FACTOR,
    LawTable,
    derive_params,
    law_potential,
    law_response,
)

logger = structlog.get_logger()

QUADRATURE_RULES = ("nodal", "gauss")

InterfaceLaw = Union[LawTable, PenaltyLaw]


@dataclass(frozen=True)
class GapState:
    """Gap, traction and tangent at the integration points."""

    g_n: np.ndarray
    g_n_star: np.ndarray
    p_n: np.ndarray
    dp_dg: np.ndarray


@dataclass(frozen=True)
class MpjrElement:
    """One interface element: paired node ids plus embedded point data."""

    index: int
    node_ids: np.ndarray
    dofs: np.ndarray
    coords: np.ndarray
    ip_coords: np.ndarray
    weights: np.ndarray
    z: np.ndarray
    law: InterfaceLaw
    operator: np.ndarray
    g_init: float


@dataclass(frozen=True)
class InterfaceLayer:
    """
    All interface elements of a mesh.

    operator: (n_points, 2 * nen * dim) normal-gap operator shared by every
    element; columns follow the element DOF layout [lower nodes, upper nodes].
    """

    dim: int
    lower: np.ndarray
    upper: np.ndarray
    dofs: np.ndarray
    coords: np.ndarray
    ip_coords: np.ndarray
    ip_samples: np.ndarray
    weights: np.ndarray
    z: np.ndarray
    law: InterfaceLaw
    operator: np.ndarray
    g_init: float
    quadrature: str

    @property
    def n_elements(self) -> int:
        return len(self.lower)

    @property
    def n_points(self) -> int:
        return self.weights.shape[1]

    @property
    def is_penalty(self) -> bool:
        return isinstance(self.law, PenaltyLaw)

    def element(self, e: int) -> MpjrElement:
        law = self.law if self.is_penalty else self.law.take(e)
        return MpjrElement(
            index=e,
            node_ids=np.concatenate([self.lower[e], self.upper[e]]),
            dofs=self.dofs[e],
            coords=self.coords[e],
            ip_coords=self.ip_coords[e],
            weights=self.weights[e],
            z=self.z[e],
            law=law,
            operator=self.operator,
            g_init=self.g_init
        )

    @property
    def elements(self) -> List[MpjrElement]:
        return [self.element(e) for e in range(self.n_elements)]


def quadrature_rule(face_dim: int, rule: str) -> Tuple[np.ndarray, np.ndarray]:
    """Natural points and reference weights on the line / quad face."""
    if rule == "nodal":
        points = natural_nodes(face_dim)
    elif rule == "gauss":
        if face_dim == 1:
            points = np.array([[GAUSS_1D[0]], [GAUSS_1D[1]]])
        else:
            points = np.array([[a, b] for b in GAUSS_1D for a in GAUSS_1D])
    else:
        raise ValueError(f"unknown quadrature rule '{rule}'")
    # both rules carry unit weights on the reference line / square
    return points, np.ones(len(points))


def normal_gap_operator(N: np.ndarray, dim: int, rotation: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Rows map element DOFs to the normal jump at each point.

    The jump is upper minus lower face displacement, rotated into the
    interface frame; its last component is the normal one.
    """
    rotation = np.eye(dim) if rotation is None else rotation
    n_points, nen = N.shape
    normal = rotation[dim - 1]
    B = np.zeros((n_points, 2, nen, dim))
    B[:, 0] = -N[:, :, None] * normal
    B[:, 1] = N[:, :, None] * normal
    return B.reshape(n_points, 2 * nen * dim)


def _face_measure(coords: np.ndarray, dN: np.ndarray) -> np.ndarray:
    # coords (ne, nen, dim) of flat faces, dN (nq, nen, face_dim)
    tangents = np.einsum("qaf,ead->eqfd", dN, coords)
    if tangents.shape[2] == 1:
        return np.linalg.norm(tangents[:, :, 0], axis=-1)
    return np.linalg.norm(np.cross(tangents[:, :, 0], tangents[:, :, 1]), axis=-1)


def _check_grids(height: ScanGrid, peak_force: ScanGrid, dissipation: ScanGrid):
    for grid, kind in ((height, GridKind.HEIGHT), (peak_force, GridKind.PEAK_FORCE), (dissipation, GridKind.DISSIPATION)):
        if grid.kind != kind:
            raise GridDataError(f"expected a {kind.value} grid, got {grid.kind.value}")
    for grid in (peak_force, dissipation):
        bad = np.argwhere(grid.values <= 0.0)
        if bad.size:
            j, i = (int(k) for k in bad[0])
            raise GridDataError(f"{grid.kind.value} must be > 0 on the interface", index=(i, j))
    shapes = {g.values.shape for g in (height, peak_force, dissipation)}
    if len(shapes) != 1:
        raise ResolutionMismatchError("scan grids must share dimensions", details={"shapes": sorted(shapes)})


def sample_index(fraction: np.ndarray, n_samples: int) -> np.ndarray:
    """Nearest sample of a position given as a fraction of the scan extent."""
    return np.floor(fraction * (n_samples - 1) + 0.5).astype(int)


def _axis_samples(n_elements: int, n_samples: int, xi: np.ndarray, axis: str) -> np.ndarray:
    # (n_elements, n_points) sample index along one axis
    if (n_samples - 1) % n_elements:
        raise ResolutionMismatchError(
            f"grid resolution along {axis} is not a multiple of the element resolution",
            details={"samples": n_samples, "elements": n_elements}
        )
    fraction = (np.arange(n_elements)[:, None] + 0.5 * (xi[None, :] + 1.0)) / n_elements
    index = sample_index(fraction, n_samples)
    if index.min() < 0 or index.max() >= n_samples:
        raise ResolutionMismatchError("integration point maps outside the scan grid", details={"axis": axis})
    return index


def default_initial_gap(peak_force: ScanGrid, dissipation: ScanGrid) -> float:
    """Equilibrium spacing g0 of the surface-averaged law."""
    return G0_FACTOR * float(dissipation.values.mean()) / float(peak_force.values.mean())


def build_interface_layer(
    mesh: Mesh,
    height: ScanGrid,
    peak_force: ScanGrid,
    dissipation: ScanGrid,
    k_cap: float,
    g_init: Optional[float] = None,
    quadrature: str = "nodal",
    uniform_adhesion: bool = False,
    penalty: bool = False
) -> InterfaceLayer:
    """
    Embed nearest-sample AFM data at every interface integration point.

    In 2D the grids must be single profiles. `uniform_adhesion` attaches the
    surface-averaged law everywhere (elevation is still point-wise);
    `penalty` attaches the repulsive-only law with k_pen = k_cap.
    """
    _check_grids(height, peak_force, dissipation)
    dim = mesh.dim
    face_dim = dim - 1
    n = mesh.n_surface
    if dim == 2 and not height.is_profile:
        raise ResolutionMismatchError("2D interfaces need single-row profiles", details={"ny": height.ny})

    points, ref_weights = quadrature_rule(face_dim, quadrature)
    N, dN = shape_functions(face_dim, points)

    coords = mesh.nodes[mesh.face_lower]
    weights = ref_weights[None, :] * _face_measure(coords, dN)
    ip_coords = np.einsum("qa,ead->eqd", N, coords)

    elements = np.arange(len(mesh.face_lower))
    if dim == 2:
        si = _axis_samples(n, height.nx, points[:, 0], "x")
        sj = np.zeros_like(si)
    else:
        ex, ey = elements % n, elements // n
        si = _axis_samples(n, height.nx, points[:, 0], "x")[ex]
        sj = _axis_samples(n, height.ny, points[:, 1], "y")[ey]

    z = height.values[sj, si]
    dg = dissipation.values[sj, si]
    p_max = peak_force.values[sj, si]

    if g_init is None:
        g_init = default_initial_gap(peak_force, dissipation)

    if penalty:
        law: InterfaceLaw = PenaltyLaw(k_pen=k_cap)
        n_laws = 1
    elif uniform_adhesion:
        params = derive_params(float(dissipation.values.mean()), float(peak_force.values.mean()), k_cap)
        law = LawTable.from_params([params]).take(np.zeros(z.shape, dtype=int))
        n_laws = 1
    else:
        pairs, inverse = np.unique(np.stack([dg.ravel(), p_max.ravel()], axis=1), axis=0, return_inverse=True)
        table = LawTable.from_params([derive_params(float(a), float(b), k_cap) for a, b in pairs])
        law = table.take(inverse.reshape(z.shape))
        n_laws = len(pairs)

    face = mesh.face_lower.shape[1]
    dofs = np.concatenate(
        [mesh.face_lower[:, :, None] * dim, mesh.face_upper[:, :, None] * dim], axis=1
    ) + np.arange(dim)
    layer = InterfaceLayer(
        dim=dim,
        lower=mesh.face_lower,
        upper=mesh.face_upper,
        dofs=dofs.reshape(len(elements), 2 * face * dim),
        coords=coords,
        ip_coords=ip_coords,
        ip_samples=np.stack([si, sj], axis=-1),
        weights=weights,
        z=z,
        law=law,
        operator=normal_gap_operator(N, dim),
        g_init=float(g_init),
        quadrature=quadrature
    )
    logger.info(
        "interface_layer_built",
        elements=layer.n_elements,
        points=layer.n_points,
        quadrature=quadrature,
        laws=n_laws,
        penalty=penalty,
        g_init=layer.g_init
    )
    return layer


# Kernels --------------------------------------------------------------------

def _gap_state(law: InterfaceLaw, g_init: float, z: np.ndarray, jump: np.ndarray) -> GapState:
    g_n = g_init + jump
    g_star = g_n + z
    p, dp = law_response(law, g_star)
    return GapState(
        g_n=g_n,
        g_n_star=g_star,
        p_n=np.asarray(p, dtype=float),
        dp_dg=np.asarray(dp, dtype=float)
    )


def element_gap(el: MpjrElement, u: np.ndarray) -> GapState:
    """Gap state at the points of one element; `u` is the global displacement vector."""
    jump = el.operator @ np.asarray(u)[el.dofs]
    return _gap_state(el.law, el.g_init, el.z, jump)


def element_residual_tangent(el: MpjrElement, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Internal force vector and consistent tangent of one element."""
    state = element_gap(el, u)
    B = el.operator
    residual = B.T @ (el.weights * state.p_n)
    tangent = B.T @ ((el.weights * state.dp_dg)[:, None] * B)
    return residual, tangent


def layer_gap(layer: InterfaceLayer, u: np.ndarray) -> GapState:
    """Gap state at all points, shape (n_elements, n_points)."""
    jump = np.asarray(u)[layer.dofs] @ layer.operator.T
    return _gap_state(layer.law, layer.g_init, layer.z, jump)


def layer_residual_tangent(layer: InterfaceLayer, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray, GapState]:
    """Element force vectors (ne, nd) and tangents (ne, nd, nd) of the whole layer."""
    state = layer_gap(layer, u)
    B = layer.operator
    residual = (layer.weights * state.p_n) @ B
    tangent = np.einsum("eq,qi,qj->eij", layer.weights * state.dp_dg, B, B)
    return residual, tangent, state


def layer_energy(layer: InterfaceLayer, u: np.ndarray) -> float:
    """Interface energy: sum of w * phi(g*) over all points."""
    state = layer_gap(layer, u)
    return float(np.sum(layer.weights * law_potential(layer.law, state.g_n_star)))
