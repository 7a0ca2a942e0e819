import unittest

import numpy as np

from src.engine.assembly import assemble_dwdg_diffusion, assemble_upwind_penalty, centered_flux_form
from src.engine.dense_oracle import (dense_div_zeta, dense_dwdg, dense_mass, dense_partial,
                                     dense_upwind_penalty)
from src.engine.dg_calculus import (BoundaryMode, TraceSide, build_avg_gradient, build_div_zeta,
                                    build_partial, build_trace_selector, check_centered_flux_equiv,
                                    check_ibp_identity, div_zeta_form, ibp_residuals)
from src.engine.dg_space import DGSpace
from src.engine.mesh_builder import generate_structured_rect
from src.models.errors import InvalidArgumentError
from src.models.mesh import DiagonalRule, Rectangle
from src.models.problem import PenaltyPolicy

UNIT = Rectangle(0.0, 0.0, 1.0, 1.0)


def constant_flow(x, y):
    return 1.0, 0.5


def radial_flow(x, y):
    return x, y


def affine(x, y):
    return 1.0 + 3.0 * x - 2.0 * y


class TestTraceSelector(unittest.TestCase):
    def setUp(self):
        self.space = DGSpace(generate_structured_rect(UNIT, 4, 4))

    def test_tags_follow_normal_sign(self):
        mesh = self.space.mesh
        for direction in (0, 1):
            selector = build_trace_selector(self.space, direction)
            for e in range(mesh.num_edges):
                right, left = selector.tags("+")[e], selector.tags("-")[e]
                if mesh.boundary[e]:
                    self.assertEqual((right, left), (TraceSide.OWN, TraceSide.OWN))
                elif selector.signs[e] == 0:
                    self.assertAlmostEqual(mesh.normals[e, direction], 0.0)
                    self.assertEqual((right, left), (TraceSide.AVERAGE, TraceSide.AVERAGE))
                elif mesh.normals[e, direction] > 0:
                    self.assertEqual((right, left), (TraceSide.PLUS, TraceSide.MINUS))
                else:
                    self.assertEqual((right, left), (TraceSide.MINUS, TraceSide.PLUS))

    def test_parallel_edges_are_averaged(self):
        selector = build_trace_selector(self.space, 0)
        alpha, beta = selector.weights("+")
        parallel = (selector.signs == 0) & self.space.mesh.interior
        self.assertTrue(parallel.any())
        np.testing.assert_allclose(alpha[parallel], 0.5)
        np.testing.assert_allclose(beta[parallel], 0.5)

    def test_invalid_arguments(self):
        with self.assertRaises(InvalidArgumentError):
            build_trace_selector(self.space, 2)
        with self.assertRaises(InvalidArgumentError):
            build_trace_selector(self.space, 0).weights("left")


class TestDiscretePartials(unittest.TestCase):
    def setUp(self):
        self.space = DGSpace(generate_structured_rect(UNIT, 4, 4))
        self.affine = self.space.l2_project(affine).coefficients
        self.rng = np.random.default_rng(7)

    def test_continuous_linear_functions_are_differentiated_exactly(self):
        expected = {0: 3.0, 1: -2.0}
        for direction in (0, 1):
            for side in ("+", "-"):
                natural = build_partial(self.space, direction, side)
                np.testing.assert_allclose(natural.apply(self.affine), expected[direction], atol=1e-10)
                data = build_partial(self.space, direction, side, BoundaryMode.DATA, g=affine)
                np.testing.assert_allclose(data.apply(self.affine), expected[direction], atol=1e-10)

    def test_average_gradient(self):
        dx, dy = build_avg_gradient(self.space)
        np.testing.assert_allclose(dx.apply(self.affine), 3.0, atol=1e-10)
        np.testing.assert_allclose(dy.apply(self.affine), -2.0, atol=1e-10)

    def test_natural_partial_integrates_to_boundary_flux(self):
        """(D v, 1) equals the boundary integral of v n_i for either side"""
        mesh = self.space.mesh
        v = self.rng.standard_normal(self.space.num_dofs)
        ones = np.ones(self.space.num_dofs)
        table = self.space.edge_table()
        for direction in (0, 1):
            weights = np.where(mesh.boundary[:, None], mesh.normals[:, direction][:, None], 0.0)
            flux = float(self.space.edge_load(np.broadcast_to(weights, table.weights.shape)) @ v)
            for side in ("+", "-"):
                derivative = build_partial(self.space, direction, side).apply(v)
                self.assertAlmostEqual(float(ones @ (self.space.mass_matrix() @ derivative)), flux, places=10)

    def test_one_sided_partials_differ_on_jumps(self):
        centroids = self.space.mesh.centroids
        step = np.repeat((centroids[:, 0] > 0.5).astype(float), 3)
        right = build_partial(self.space, 0, "+").apply(step)
        left = build_partial(self.space, 0, "-").apply(step)
        self.assertGreater(float(np.abs(right - left).max()), 1.0)

    def test_data_mode_needs_boundary_values(self):
        with self.assertRaises(InvalidArgumentError):
            build_partial(self.space, 0, "+", BoundaryMode.DATA)

    def test_divergence_side_is_validated(self):
        with self.assertRaises(InvalidArgumentError):
            build_div_zeta(self.space, constant_flow, "up")


class TestCalculusIdentities(unittest.TestCase):
    def setUp(self):
        self.space = DGSpace(generate_structured_rect(UNIT, 4, 4))
        rng = np.random.default_rng(11)
        self.pairs = [rng.standard_normal((2, self.space.num_dofs)) for _ in range(5)]

    def test_integration_by_parts(self):
        for flow, divergence in ((constant_flow, 0.0), (radial_flow, 2.0)):
            for v, phi in self.pairs:
                plus, minus = ibp_residuals(self.space, flow, lambda x, y, d=divergence: d, v, phi)
                self.assertLess(plus, 1e-11)
                self.assertLess(minus, 1e-11)

    def test_single_sided_check(self):
        v, phi = self.pairs[0]
        self.assertLess(check_ibp_identity(self.space, radial_flow, lambda x, y: 2.0, v, phi, "-"), 1e-11)

    def test_centered_flux_equivalence(self):
        for flow, divergence in ((constant_flow, 0.0), (radial_flow, 2.0)):
            for v, phi in self.pairs:
                defect = check_centered_flux_equiv(self.space, flow, lambda x, y, d=divergence: d, v, phi)
                self.assertLess(defect, 1e-11)

    def test_centered_flux_matches_averaged_divergence(self):
        averaged = div_zeta_form(self.space, constant_flow, "avg").toarray()
        centered = centered_flux_form(self.space, constant_flow, lambda x, y: 0.0).toarray()
        np.testing.assert_allclose(centered, averaged, atol=1e-12 * np.abs(averaged).max())


class TestDenseOracle(unittest.TestCase):
    """Sparse operators against the element-by-element reference on small meshes"""

    def setUp(self):
        self.meshes = [generate_structured_rect(UNIT, 2, 2),
                       generate_structured_rect(UNIT, 3, 3, DiagonalRule.CORNER_SAFE)]

    def assertMatrixClose(self, sparse, dense):
        scale = max(float(np.abs(dense).max()), 1.0)
        np.testing.assert_allclose(sparse.toarray() if hasattr(sparse, "toarray") else sparse,
                                   dense, atol=1e-12 * scale)

    def test_mass(self):
        for mesh in self.meshes:
            self.assertMatrixClose(DGSpace(mesh).mass_matrix(), dense_mass(mesh))

    def test_partials(self):
        g = lambda x, y: x + 2.0 * y
        for mesh in self.meshes:
            space = DGSpace(mesh)
            for mode in ("natural", "zero-data", "data"):
                for direction in (0, 1):
                    for side in ("+", "-"):
                        operator = build_partial(space, direction, side, mode, g=g)
                        matrix, load = dense_partial(mesh, direction, side, mode, g)
                        self.assertMatrixClose(operator.matrix, matrix)
                        if mode == "data":
                            np.testing.assert_allclose(operator.load, load, atol=1e-12)
                        else:
                            self.assertIsNone(operator.load)

    def test_divergences(self):
        for mesh in self.meshes:
            space = DGSpace(mesh)
            for side in ("+", "-", "avg"):
                self.assertMatrixClose(build_div_zeta(space, radial_flow, side).matrix,
                                       dense_div_zeta(mesh, radial_flow, side))

    def test_upwind_penalty(self):
        for mesh in self.meshes:
            self.assertMatrixClose(assemble_upwind_penalty(mesh, constant_flow),
                                   dense_upwind_penalty(mesh, constant_flow))

    def test_dwdg(self):
        mesh = self.meshes[1]
        for sigma in (0.0, 5.0):
            self.assertMatrixClose(assemble_dwdg_diffusion(mesh, PenaltyPolicy(sigma)), dense_dwdg(mesh, sigma))


if __name__ == '__main__':
    unittest.main()
