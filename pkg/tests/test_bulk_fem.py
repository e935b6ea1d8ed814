"""
Tests for mesh generation, bulk element kernels and phase assignment.
"""

import numpy as np
import pytest

from mpjr.core.exceptions import GeometryError, ResolutionMismatchError, UnsupportedModelError
from mpjr.schemas.grid import GridKind
from mpjr.schemas.material import Material
from mpjr.services import bulk_fem
from mpjr.services.afm_ingest import make_grid, segment_phases

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def _mask(moduli, threshold=72.44):
    grid = make_grid(np.atleast_2d(moduli), 1.0, 1.0, GridKind.MODULUS)
    return segment_phases(grid, threshold)


def _unit_square_reference():
    # Bilinear quad, E = 1, nu = 0, unit thickness
    k = [0.5, 0.125, -0.25, -0.125, -0.25, -0.125, 0.0, 0.125]
    order = [
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ]
    return np.array([[k[i] for i in row] for row in order])


# ================================================================
# Mesh generation
# ================================================================
class TestMeshGeneration:
    def test_2d_counts(self):
        mesh = bulk_fem.generate_mesh_2d(1.0, 0.5, 4, 1.0, 2)
        assert mesh.n_elements == 8
        assert mesh.n_bulk_nodes == 15
        assert mesh.n_nodes == 20
        assert mesh.n_dofs == 40

    def test_3d_counts(self):
        mesh = bulk_fem.generate_mesh_3d(1.0, 0.5, 2, 1.0, 1)
        assert mesh.n_elements == 4
        assert mesh.n_bulk_nodes == 18
        assert mesh.upper_nodes.size == 9

    def test_upper_nodes_coincide_with_surface(self):
        mesh = bulk_fem.generate_mesh_2d(2.0, 0.5, 4, 1.5, 3)
        np.testing.assert_array_equal(mesh.nodes[mesh.upper_nodes], mesh.nodes[mesh.surface_nodes])
        assert np.all(mesh.nodes[mesh.surface_nodes, 1] == 0.0)
        assert np.all(mesh.nodes[mesh.bottom_nodes, 1] == -0.5)

    def test_graded_series(self):
        h = bulk_fem.layer_thicknesses(1.0, 3, 2.0)
        np.testing.assert_allclose(h, [1 / 7, 2 / 7, 4 / 7], rtol=1e-14)
        assert h.sum() == pytest.approx(1.0, rel=1e-14)

    def test_graded_depth_levels(self):
        mesh = bulk_fem.generate_mesh_2d(1.0, 0.7, 2, 2.0, 3)
        levels = np.unique(mesh.nodes[:, 1])[::-1]
        np.testing.assert_allclose(levels, [0.0, -0.1, -0.3, -0.7], atol=1e-15)

    def test_jacobians_positive(self):
        mesh = bulk_fem.generate_mesh_2d(1.0, 0.3, 8, 1.3, 5)
        coords = mesh.nodes[mesh.elements]
        points, _ = bulk_fem.gauss_points(2)
        _, dN = bulk_fem.shape_functions(2, points)
        for g in range(len(points)):
            _, detJ = bulk_fem._gradients(coords, dN[g])
            assert np.all(detJ > 0)

    def test_reversed_element_rejected(self):
        with pytest.raises(GeometryError):
            bulk_fem.bulk_element_stiffness(UNIT_SQUARE[::-1], Material(E=1.0, nu=0.0))

    @pytest.mark.parametrize("kwargs", [
        {"L": 0.0, "t": 1.0, "n_surface": 4},
        {"L": 1.0, "t": 1.0, "n_surface": 1},
        {"L": 1.0, "t": 1.0, "n_surface": 4, "grading": 0.5},
        {"L": 1.0, "t": 1.0, "n_surface": 4, "n_layers": 0},
    ])
    def test_invalid_dimensions(self, kwargs):
        with pytest.raises(GeometryError):
            bulk_fem.generate_mesh_2d(**kwargs)

    def test_dof_sets(self):
        mesh = bulk_fem.generate_mesh_2d(1.0, 0.5, 4, 1.0, 2)
        np.testing.assert_array_equal(mesh.loading_dofs, 2 * mesh.upper_nodes + 1)
        assert mesh.indenter_dofs.size == 2 * mesh.upper_nodes.size
        assert mesh.fixed_dofs.size == 2 * mesh.bottom_nodes.size
        assert not set(mesh.fixed_dofs) & set(mesh.indenter_dofs)


# ================================================================
# Element kernels
# ================================================================
class TestElementStiffness:
    def test_unit_square_closed_form(self):
        K = bulk_fem.bulk_element_stiffness(UNIT_SQUARE, Material(E=1.0, nu=0.0))
        np.testing.assert_allclose(K, _unit_square_reference(), atol=1e-14)

    def test_symmetric(self):
        coords = np.array([[0.0, 0.0], [2.0, 0.1], [2.2, 1.0], [-0.1, 0.8]])
        K = bulk_fem.bulk_element_stiffness(coords, Material(E=3.0, nu=0.3))
        np.testing.assert_allclose(K, K.T, atol=1e-13)

    @pytest.mark.parametrize("dim,zero_modes", [(2, 3), (3, 6)])
    def test_rigid_body_modes(self, dim, zero_modes):
        coords = bulk_fem.natural_nodes(dim) * 0.5 + 0.5
        coords[:, 0] *= 2.0
        K = bulk_fem.bulk_element_stiffness(coords, Material(E=1.0, nu=0.3))
        eig = np.linalg.eigvalsh(K)
        assert np.sum(np.abs(eig) < 1e-10 * eig.max()) == zero_modes

    def test_modulus_scaling(self):
        soft = bulk_fem.bulk_element_stiffness(UNIT_SQUARE, Material(E=1.0, nu=0.25))
        stiff = bulk_fem.bulk_element_stiffness(UNIT_SQUARE, Material(E=2.0, nu=0.25))
        np.testing.assert_allclose(stiff, 2.0 * soft, rtol=1e-14)

    def test_plane_strain_matrix(self):
        D = bulk_fem.elasticity_matrix(1.0, 0.25, 2)[0]
        scale = 1.0 / (1.25 * 0.5)
        np.testing.assert_allclose(D[:2, :2], scale * np.array([[0.75, 0.25], [0.25, 0.75]]), rtol=1e-14)
        assert D[2, 2] == pytest.approx(1.0 / 2.5)


class TestPatch:
    @pytest.mark.parametrize("dim", [2, 3])
    def test_linear_field_balanced_inside(self, dim):
        if dim == 2:
            mesh = bulk_fem.generate_mesh_2d(1.0, 0.6, 4, 1.7, 4, material=Material(E=5.0, nu=0.3))
        else:
            mesh = bulk_fem.generate_mesh_3d(1.0, 0.6, 3, 1.7, 3, material=Material(E=5.0, nu=0.3))
        H = np.random.default_rng(8).normal(scale=1e-3, size=(dim, dim))
        u = (mesh.nodes @ H.T).ravel()
        r = bulk_fem.assemble_bulk_stiffness(mesh) @ u

        bulk = mesh.nodes[: mesh.n_bulk_nodes]
        lo, hi = bulk.min(axis=0), bulk.max(axis=0)
        inside = np.all((bulk > lo + 1e-12) & (bulk < hi - 1e-12), axis=1)
        interior = mesh.node_dofs(np.flatnonzero(inside))
        assert interior.size > 0
        assert np.max(np.abs(r[interior])) <= 1e-10 * np.max(np.abs(r))

    def test_constant_stress(self):
        mesh = bulk_fem.generate_mesh_2d(1.0, 0.4, 4, 1.5, 3, material=Material(E=2.0, nu=0.2))
        eps = np.array([1e-3, -2e-3, 5e-4])
        H = np.array([[eps[0], eps[2]], [0.0, eps[1]]])
        u = (mesh.nodes @ H.T).ravel()
        sigma = bulk_fem.element_stresses(mesh, u)
        expected = bulk_fem.elasticity_matrix(2.0, 0.2, 2)[0] @ eps
        np.testing.assert_allclose(sigma, np.tile(expected, (mesh.n_elements, 1)), rtol=1e-10, atol=1e-16)

    def test_upper_nodes_carry_no_stiffness(self):
        mesh = bulk_fem.generate_mesh_2d(1.0, 0.4, 4, 1.0, 2)
        K = bulk_fem.assemble_bulk_stiffness(mesh)
        assert abs(K[mesh.indenter_dofs]).sum() == 0.0


# ================================================================
# Phase assignment
# ================================================================
class TestAssignPhases:
    MATRIX = Material(E=128.67, nu=0.32)
    INCLUSION = Material(E=64.27, nu=0.32, phase="inclusion")

    def test_columnar_extrusion(self):
        mesh = bulk_fem.generate_mesh_2d(1.0, 0.4, 4, 1.0, 3)
        mask = _mask([[100.0, 50.0, 100.0, 50.0]])
        mesh = bulk_fem.assign_phases(mesh, mask, (self.MATRIX, self.INCLUSION))
        columns = mesh.element_columns
        np.testing.assert_array_equal(mesh.element_material, np.where(columns % 2 == 1, 1, 0))
        for i in range(4):
            assert len(set(mesh.element_material[columns == i])) == 1

    def test_random_mask_column_centers(self):
        rng = np.random.default_rng(21)
        moduli = rng.choice([50.0, 100.0], size=(1, 9))
        mesh = bulk_fem.generate_mesh_2d(1.0, 0.4, 4, 1.2, 2)
        mask = _mask(moduli)
        mesh = bulk_fem.assign_phases(mesh, mask, (self.MATRIX, self.INCLUSION))
        for e in range(mesh.n_elements):
            i = e % 4
            assert mesh.element_material[e] == mask.labels[0, 2 * i + 1]

    def test_homogenized_matches_uniform_heterogeneous(self):
        same = Material(E=100.0, nu=0.3)
        mesh = bulk_fem.generate_mesh_2d(1.0, 0.4, 4, 1.0, 2)
        mask = _mask([[100.0, 50.0, 100.0, 50.0]])
        het = bulk_fem.assign_phases(mesh, mask, (same, same))
        hom = bulk_fem.assign_phases(mesh, mask, (same, same), homogenized=True)
        K_het = bulk_fem.assemble_bulk_stiffness(het).toarray()
        K_hom = bulk_fem.assemble_bulk_stiffness(hom).toarray()
        np.testing.assert_allclose(K_hom, K_het, rtol=1e-12, atol=1e-12)

    def test_homogenized_mixture_rule(self):
        mesh = bulk_fem.generate_mesh_2d(1.0, 0.4, 4, 1.0, 1)
        mask = _mask([[100.0, 50.0, 100.0, 100.0]])
        hom = bulk_fem.assign_phases(mesh, mask, (self.MATRIX, self.INCLUSION), homogenized=True)
        assert hom.materials[0].E == pytest.approx(0.75 * 128.67 + 0.25 * 64.27, rel=1e-14)
        assert np.all(hom.element_material == 0)

    def test_phase_fractions(self):
        mesh = bulk_fem.generate_mesh_2d(1.0, 0.4, 4, 1.4, 3)
        mask = _mask([[100.0, 50.0, 100.0, 100.0]])
        mesh = bulk_fem.assign_phases(mesh, mask, (self.MATRIX, self.INCLUSION))
        np.testing.assert_allclose(bulk_fem.phase_fractions(mesh), [0.75, 0.25], rtol=1e-12)

    def test_3d_heterogeneous_unsupported(self):
        mesh = bulk_fem.generate_mesh_3d(1.0, 0.4, 2, 1.0, 1)
        mask = _mask(np.full((3, 3), 100.0))
        with pytest.raises(UnsupportedModelError):
            bulk_fem.assign_phases(mesh, mask, (self.MATRIX, self.INCLUSION))

    def test_3d_homogenized_allowed(self):
        mesh = bulk_fem.generate_mesh_3d(1.0, 0.4, 2, 1.0, 1)
        mask = _mask(np.full((3, 3), 100.0))
        hom = bulk_fem.assign_phases(mesh, mask, (self.MATRIX, self.INCLUSION), homogenized=True)
        assert hom.materials[0].E == pytest.approx(128.67)

    def test_map_mask_rejected_in_2d(self):
        mesh = bulk_fem.generate_mesh_2d(1.0, 0.4, 4, 1.0, 1)
        with pytest.raises(ResolutionMismatchError):
            bulk_fem.assign_phases(mesh, _mask(np.full((2, 5), 100.0)), (self.MATRIX, self.INCLUSION))

    def test_incompatible_resolution(self):
        with pytest.raises(ResolutionMismatchError):
            bulk_fem.column_samples(4, 6)
