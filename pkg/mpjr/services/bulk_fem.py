"""
Structured graded meshes and linear-elastic bulk kernels.

2D: bilinear quads in plane strain, x along the interface, y up.
3D: trilinear hexes, interface in the x-y plane, z up.
The interface plane is y = 0 (2D) / z = 0 (3D); the bulk occupies the
negative side and is clamped at its bottom face (rigid substrate). A second
set of face nodes coincident with the top surface carries the indenter side
of the interface elements.
"""

import itertools
from dataclasses import dataclass, replace
from typing import Optional, Tuple, TYPE_CHECKING

import numpy as np
import scipy.sparse as sp
import structlog

from mpjr.core.exceptions import GeometryError, ResolutionMismatchError, UnsupportedModelError
from mpjr.schemas.grid import PhaseMask
from mpjr.schemas.material import Material
from mpjr.services.afm_ingest import effective_modulus

if TYPE_CHECKING:
    from mpjr.services.mpjr_element import InterfaceLayer

logger = structlog.get_logger()

GAUSS_1D = (-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0))


def natural_nodes(dim: int) -> np.ndarray:
    """Corner coordinates of the reference line/quad/hex, counterclockwise per layer."""
    if dim == 1:
        return np.array([[-1.0], [1.0]])
    quad = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    if dim == 2:
        return quad
    if dim == 3:
        return np.vstack([np.hstack([quad, -np.ones((4, 1))]), np.hstack([quad, np.ones((4, 1))])])
    raise GeometryError(f"unsupported element dimension {dim}")


def shape_functions(dim: int, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Multilinear shape functions and their natural derivatives.

    Returns N with shape (n_points, nen) and dN with shape (n_points, nen, dim).
    """
    corners = natural_nodes(dim)
    points = np.atleast_2d(points)
    factors = 0.5 * (1.0 + points[:, None, :] * corners[None, :, :])  # (np, nen, dim)
    N = factors.prod(axis=2)
    dN = np.empty(factors.shape)
    for d in range(dim):
        others = np.delete(factors, d, axis=2).prod(axis=2)
        dN[:, :, d] = 0.5 * corners[None, :, d] * others
    return N, dN


def gauss_points(dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """2-point tensor Gauss rule on the reference element."""
    points = np.array(list(itertools.product(GAUSS_1D, repeat=dim)))
    return points, np.ones(len(points))


def elasticity_matrix(E, nu, dim: int) -> np.ndarray:
    """
    Isotropic constitutive matrices, batched over E and nu.

    2D is plane strain with Voigt order (xx, yy, xy); 3D uses
    (xx, yy, zz, xy, yz, xz) with engineering shear strains.
    """
    E = np.atleast_1d(np.asarray(E, dtype=float))
    nu = np.broadcast_to(np.asarray(nu, dtype=float), E.shape)
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    n_normal = dim
    n_voigt = 3 if dim == 2 else 6
    D = np.zeros(E.shape + (n_voigt, n_voigt))
    D[..., :n_normal, :n_normal] = lam[..., None, None]
    for k in range(n_normal):
        D[..., k, k] += 2.0 * mu
    for k in range(n_normal, n_voigt):
        D[..., k, k] = mu
    return D


def strain_displacement(dNx: np.ndarray) -> np.ndarray:
    """B matrices from physical shape-function gradients (ne, nen, dim)."""
    ne, nen, dim = dNx.shape
    if dim == 2:
        B = np.zeros((ne, 3, 2 * nen))
        B[:, 0, 0::2] = dNx[:, :, 0]
        B[:, 1, 1::2] = dNx[:, :, 1]
        B[:, 2, 0::2] = dNx[:, :, 1]
        B[:, 2, 1::2] = dNx[:, :, 0]
        return B
    B = np.zeros((ne, 6, 3 * nen))
    B[:, 0, 0::3] = dNx[:, :, 0]
    B[:, 1, 1::3] = dNx[:, :, 1]
    B[:, 2, 2::3] = dNx[:, :, 2]
    B[:, 3, 0::3] = dNx[:, :, 1]
    B[:, 3, 1::3] = dNx[:, :, 0]
    B[:, 4, 1::3] = dNx[:, :, 2]
    B[:, 4, 2::3] = dNx[:, :, 1]
    B[:, 5, 0::3] = dNx[:, :, 2]
    B[:, 5, 2::3] = dNx[:, :, 0]
    return B


def _gradients(coords: np.ndarray, dN_point: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # J[e, i, j] = dx_j / dxi_i
    J = np.einsum("ai,eaj->eij", dN_point, coords)
    detJ = np.linalg.det(J)
    if np.any(detJ <= 0.0):
        bad = int(np.argmin(detJ))
        raise GeometryError("non-positive element Jacobian", details={"element": bad, "detJ": float(detJ[bad])})
    dNx = np.einsum("eij,aj->eai", np.linalg.inv(J), dN_point)
    return dNx, detJ


def batched_stiffness(coords: np.ndarray, E: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Element stiffness matrices for a batch of elements (2x2 / 2x2x2 Gauss)."""
    coords = np.asarray(coords, dtype=float)
    ne, nen, dim = coords.shape
    D = elasticity_matrix(E, nu, dim)
    points, weights = gauss_points(dim)
    _, dN = shape_functions(dim, points)
    K = np.zeros((ne, nen * dim, nen * dim))
    for g, w in enumerate(weights):
        dNx, detJ = _gradients(coords, dN[g])
        B = strain_displacement(dNx)
        K += np.einsum("evi,evw,ewj->eij", B, D, B) * (w * detJ)[:, None, None]
    return K


def bulk_element_stiffness(coords: np.ndarray, material: Material) -> np.ndarray:
    """Stiffness of one quad (4x2 coords) or hex (8x3 coords)."""
    return batched_stiffness(np.asarray(coords)[None], np.array([material.E]), np.array([material.nu]))[0]


@dataclass(frozen=True)
class Mesh:
    """Structured bulk mesh plus the paired face nodes of the interface."""

    dim: int
    length: float
    thickness: float
    n_surface: int
    nodes: np.ndarray
    elements: np.ndarray
    element_material: np.ndarray
    materials: Tuple[Material, ...]
    layer_thicknesses: np.ndarray
    surface_nodes: np.ndarray
    upper_nodes: np.ndarray
    bottom_nodes: np.ndarray
    face_lower: np.ndarray
    face_upper: np.ndarray
    interface: Optional["InterfaceLayer"] = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_bulk_nodes(self) -> int:
        return len(self.nodes) - self.upper_nodes.size

    @property
    def n_dofs(self) -> int:
        return self.n_nodes * self.dim

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def element_columns(self) -> np.ndarray:
        """Surface column of every bulk element: i in 2D, (i, j) pairs in 3D."""
        index = np.arange(self.n_elements)
        if self.dim == 2:
            return index % self.n_surface
        per_layer = index % (self.n_surface ** 2)
        return np.stack([per_layer % self.n_surface, per_layer // self.n_surface], axis=1)

    def node_dofs(self, node_ids: np.ndarray, components: Optional[Tuple[int, ...]] = None) -> np.ndarray:
        """Global DOF numbers (node * dim + component), node-major."""
        components = tuple(range(self.dim)) if components is None else components
        node_ids = np.asarray(node_ids).ravel()
        return (node_ids[:, None] * self.dim + np.asarray(components)[None, :]).ravel()

    def element_dofs(self) -> np.ndarray:
        return (self.elements[:, :, None] * self.dim + np.arange(self.dim)).reshape(self.n_elements, -1)

    @property
    def fixed_dofs(self) -> np.ndarray:
        """All DOFs of the clamped bottom face."""
        return self.node_dofs(self.bottom_nodes)

    @property
    def indenter_dofs(self) -> np.ndarray:
        """All DOFs of the indenter face nodes (normal prescribed, tangential held)."""
        return self.node_dofs(self.upper_nodes)

    @property
    def loading_dofs(self) -> np.ndarray:
        """Normal DOFs of the indenter face, carrying the far-field displacement."""
        return self.node_dofs(self.upper_nodes, (self.dim - 1,))

    def element_moduli(self) -> Tuple[np.ndarray, np.ndarray]:
        E = np.array([m.E for m in self.materials])[self.element_material]
        nu = np.array([m.nu for m in self.materials])[self.element_material]
        return E, nu


def layer_thicknesses(thickness: float, n_layers: int, grading: float) -> np.ndarray:
    """Geometric layer series, finest at the interface: h, g*h, g^2*h, ... summing to thickness."""
    if grading == 1.0:
        return np.full(n_layers, thickness / n_layers)
    first = thickness * (grading - 1.0) / (grading ** n_layers - 1.0)
    return first * grading ** np.arange(n_layers)


def _depth_levels(thickness: float, n_layers: int, grading: float) -> Tuple[np.ndarray, np.ndarray]:
    h = layer_thicknesses(thickness, n_layers, grading)
    levels = -np.concatenate([[0.0], np.cumsum(h)])
    levels[-1] = -thickness
    return h, levels


def _check_dimensions(length: float, thickness: float, n_surface: int, n_layers: int, grading: float):
    if not (length > 0 and thickness > 0):
        raise GeometryError("length and thickness must be positive", details={"L": length, "t": thickness})
    if n_surface < 2 or n_layers < 1:
        raise GeometryError("need n_surface >= 2 and n_layers >= 1", details={"n_surface": n_surface, "n_layers": n_layers})
    if grading < 1.0:
        raise GeometryError("grading ratio must be >= 1", details={"grading": grading})


def generate_mesh_2d(
    L: float,
    t: float,
    n_surface: int,
    grading: float = 1.0,
    n_layers: int = 4,
    material: Optional[Material] = None
) -> Mesh:
    """
    Quad mesh of an L x t layer: uniform along x, geometrically graded in depth.

    Node id = level * (n_surface + 1) + i with level 0 at the interface.
    """
    _check_dimensions(L, t, n_surface, n_layers, grading)
    n = n_surface
    h, levels = _depth_levels(t, n_layers, grading)
    x = np.linspace(0.0, L, n + 1)

    xx, yy = np.meshgrid(x, levels)
    bulk_nodes = np.stack([xx.ravel(), yy.ravel()], axis=1)
    n_bulk = len(bulk_nodes)

    k, i = np.meshgrid(np.arange(n_layers), np.arange(n), indexing="ij")
    k, i = k.ravel(), i.ravel()
    top = k * (n + 1) + i
    bottom = (k + 1) * (n + 1) + i
    elements = np.stack([bottom, bottom + 1, top + 1, top], axis=1)

    surface = np.arange(n + 1)
    upper = n_bulk + surface
    nodes = np.vstack([bulk_nodes, bulk_nodes[surface]])

    mesh = Mesh(
        dim=2,
        length=L,
        thickness=t,
        n_surface=n,
        nodes=nodes,
        elements=elements,
        element_material=np.zeros(len(elements), dtype=int),
        materials=(material or Material(E=1.0),),
        layer_thicknesses=h,
        surface_nodes=surface,
        upper_nodes=upper,
        bottom_nodes=n_layers * (n + 1) + np.arange(n + 1),
        face_lower=np.stack([surface[:-1], surface[1:]], axis=1),
        face_upper=np.stack([upper[:-1], upper[1:]], axis=1)
    )
    logger.info("mesh_generated", dim=2, elements=mesh.n_elements, nodes=mesh.n_nodes, grading=grading)
    return mesh


def generate_mesh_3d(
    L: float,
    depth: float,
    n_surface: int,
    grading: float = 1.0,
    n_layers: int = 4,
    material: Optional[Material] = None
) -> Mesh:
    """
    Hex mesh of an L x L x depth block, uniform in plan and graded in depth.

    Node id = level * (n+1)^2 + j * (n+1) + i.
    """
    _check_dimensions(L, depth, n_surface, n_layers, grading)
    n = n_surface
    m = n + 1
    h, levels = _depth_levels(depth, n_layers, grading)
    xy = np.linspace(0.0, L, m)

    zz, yy, xx = np.meshgrid(levels, xy, xy, indexing="ij")
    bulk_nodes = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)
    n_bulk = len(bulk_nodes)

    k, j, i = (a.ravel() for a in np.meshgrid(np.arange(n_layers), np.arange(n), np.arange(n), indexing="ij"))

    def node(level, jj, ii):
        return level * m * m + jj * m + ii

    def face(level):
        return [node(level, j, i), node(level, j, i + 1), node(level, j + 1, i + 1), node(level, j + 1, i)]

    elements = np.stack(face(k + 1) + face(k), axis=1)

    surface = np.arange(m * m).reshape(m, m)
    upper = n_bulk + surface
    fj, fi = (a.ravel() for a in np.meshgrid(np.arange(n), np.arange(n), indexing="ij"))

    def quad(ids):
        return np.stack([ids[fj, fi], ids[fj, fi + 1], ids[fj + 1, fi + 1], ids[fj + 1, fi]], axis=1)

    mesh = Mesh(
        dim=3,
        length=L,
        thickness=depth,
        n_surface=n,
        nodes=np.vstack([bulk_nodes, bulk_nodes[surface.ravel()]]),
        elements=elements,
        element_material=np.zeros(len(elements), dtype=int),
        materials=(material or Material(E=1.0),),
        layer_thicknesses=h,
        surface_nodes=surface,
        upper_nodes=upper,
        bottom_nodes=n_layers * m * m + np.arange(m * m),
        face_lower=quad(surface),
        face_upper=quad(upper)
    )
    logger.info("mesh_generated", dim=3, elements=mesh.n_elements, nodes=mesh.n_nodes, grading=grading)
    return mesh


def column_samples(n_columns: int, n_samples: int) -> np.ndarray:
    """
    Sample index feeding each element column.

    Either one sample per column, or node-based samples (n_samples - 1 an
    integer multiple of n_columns) read at the column center.
    """
    if n_samples == n_columns:
        return np.arange(n_columns)
    if (n_samples - 1) % n_columns:
        raise ResolutionMismatchError(
            "mask resolution does not map onto the element columns",
            details={"columns": n_columns, "samples": n_samples}
        )
    stride = (n_samples - 1) // n_columns
    return ((2 * np.arange(n_columns) + 1) * stride) // 2


def assign_phases(
    mesh: Mesh,
    mask: PhaseMask,
    materials: Tuple[Material, Material],
    homogenized: bool = False,
    e_star: Optional[float] = None
) -> Mesh:
    """
    Assign bulk materials by columnar extrusion of the surface phase mask.

    materials = (matrix, inclusion). In homogenized mode every element gets
    the mixture-rule modulus (or `e_star` when given).
    """
    matrix, inclusion = materials
    if homogenized:
        if e_star is None:
            e_star = effective_modulus([
                (mask.matrix_fraction, matrix.E),
                (mask.inclusion_fraction, inclusion.E),
            ])
        effective = Material(E=e_star, nu=matrix.nu, phase="homogenized")
        logger.info("phases_homogenized", e_star=e_star)
        return replace(
            mesh,
            materials=(effective,),
            element_material=np.zeros(mesh.n_elements, dtype=int)
        )

    if mesh.dim != 2:
        raise UnsupportedModelError("heterogeneous bulk phases are only supported in 2D; use homogenized mode")
    if mask.ny != 1:
        raise ResolutionMismatchError("2D phase assignment needs a profile mask (ny = 1)", details={"ny": mask.ny})

    samples = column_samples(mesh.n_surface, mask.nx)
    column_label = mask.labels[0, samples]
    element_material = column_label[mesh.element_columns].astype(int)
    logger.info(
        "phases_assigned",
        inclusion_columns=int(column_label.sum()),
        columns=mesh.n_surface
    )
    return replace(mesh, materials=(matrix, inclusion), element_material=element_material)


def phase_fractions(mesh: Mesh) -> np.ndarray:
    """Volume fraction of every material of the mesh."""
    coords = mesh.nodes[mesh.elements]
    volume = np.prod(coords.max(axis=1) - coords.min(axis=1), axis=1)
    totals = np.bincount(mesh.element_material, weights=volume, minlength=len(mesh.materials))
    return totals / totals.sum()


def assemble_bulk_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """Global bulk stiffness; duplicates are summed in sorted COO order."""
    E, nu = mesh.element_moduli()
    K_e = batched_stiffness(mesh.nodes[mesh.elements], E, nu)
    dofs = mesh.element_dofs()
    n = dofs.shape[1]
    rows = np.broadcast_to(dofs[:, :, None], (len(dofs), n, n))
    cols = np.broadcast_to(dofs[:, None, :], (len(dofs), n, n))
    K = sp.coo_matrix((K_e.ravel(), (rows.ravel(), cols.ravel())), shape=(mesh.n_dofs, mesh.n_dofs)).tocsr()
    logger.debug("bulk_stiffness_assembled", dofs=mesh.n_dofs, nnz=K.nnz)
    return K


def element_stresses(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Stress at the element centroid (Voigt order of `elasticity_matrix`)."""
    coords = mesh.nodes[mesh.elements]
    _, dN = shape_functions(mesh.dim, np.zeros((1, mesh.dim)))
    dNx, _ = _gradients(coords, dN[0])
    B = strain_displacement(dNx)
    E, nu = mesh.element_moduli()
    D = elasticity_matrix(E, nu, mesh.dim)
    u_e = np.asarray(u)[mesh.element_dofs()]
    return np.einsum("evw,ewj,ej->ev", D, B, u_e)
