import unittest

import numpy as np

from src.engine.dg_space import DGSpace, local_mass_matrix
from src.engine.mesh_builder import generate_structured_rect
from src.models.dg_function import DGFunction
from src.models.errors import InvalidArgumentError
from src.models.mesh import Rectangle


def linear(x, y):
    return 1.0 + x + 2.0 * y


class TestDGSpace(unittest.TestCase):
    def setUp(self):
        self.mesh = generate_structured_rect(Rectangle(0.0, 0.0, 1.0, 1.0), 4, 4)
        self.space = DGSpace(self.mesh)
        self.ones = np.ones(self.space.num_dofs)

    def test_mass_matrix(self):
        mass = self.space.mass_matrix()
        self.assertEqual(mass.shape, (96, 96))
        self.assertAlmostEqual(float(self.ones @ (mass @ self.ones)), 1.0)
        identity = (self.space.inverse_mass_matrix() @ mass).toarray()
        np.testing.assert_allclose(identity, np.eye(96), atol=1e-12)

    def test_local_mass_matrix(self):
        block = local_mass_matrix(self.mesh, 3)
        expected = (1.0 / 32.0) * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 12.0
        np.testing.assert_allclose(block, expected)
        np.testing.assert_allclose(self.space.local_mass_matrix(3), expected)

    def test_weighted_mass_with_unit_weight(self):
        table = self.space.element_table()
        weighted = self.space.weighted_mass_matrix(np.ones(table.weights.shape))
        np.testing.assert_allclose(weighted.toarray(), self.space.mass_matrix().toarray(), atol=1e-15)

    def test_projection_reproduces_linear_functions(self):
        projected = self.space.l2_project(linear)
        corners = self.mesh.vertices[self.mesh.triangles]
        expected = linear(corners[..., 0], corners[..., 1]).ravel()
        np.testing.assert_allclose(projected.coefficients, expected, atol=1e-12)

    def test_projection_preserves_integrals(self):
        projected = self.space.l2_project(lambda x, y: x ** 2)
        integral = float(self.ones @ (self.space.mass_matrix() @ projected.coefficients))
        self.assertAlmostEqual(integral, 1.0 / 3.0, places=12)

    def test_gradients(self):
        coefficients = self.space.l2_project(linear).coefficients
        np.testing.assert_allclose(self.space.element_gradients(coefficients), [[1.0, 2.0]] * 32, atol=1e-12)

    def test_edge_traces_of_continuous_function(self):
        coefficients = self.space.l2_project(linear).coefficients
        plus, minus = self.space.edge_traces(coefficients)
        table = self.space.edge_table()
        exact = linear(table.points[..., 0], table.points[..., 1])
        np.testing.assert_allclose(plus, exact, atol=1e-12)
        interior = self.mesh.interior
        np.testing.assert_allclose(minus[interior], exact[interior], atol=1e-12)
        np.testing.assert_allclose(minus[~interior], 0.0)

    def test_edge_load(self):
        table = self.space.edge_table()
        load = self.space.edge_load(np.ones(table.weights.shape))
        self.assertAlmostEqual(float(load.sum()), float(self.mesh.edge_lengths.sum()))
        minus_load = self.space.edge_load(np.ones(table.weights.shape), side="minus")
        self.assertAlmostEqual(float(minus_load.sum()), float(self.mesh.edge_lengths[self.mesh.interior].sum()))

    def test_element_values_match_evaluate(self):
        projected = self.space.l2_project(linear)
        table = self.space.element_table()
        values = self.space.element_values(projected.coefficients)
        x, y = table.points[5, 0]
        self.assertAlmostEqual(values[5, 0], self.space.evaluate(projected, 5, (x, y)))
        self.assertAlmostEqual(values[5, 0], linear(x, y))

    def test_cached(self):
        calls = []
        first = self.space.cached("key", lambda: calls.append(1) or "value")
        second = self.space.cached("key", lambda: calls.append(1) or "other")
        self.assertEqual((first, second, len(calls)), ("value", "value", 1))


class TestDGFunction(unittest.TestCase):
    def setUp(self):
        self.mesh = generate_structured_rect(Rectangle(0.0, 0.0, 1.0, 1.0), 2, 2)

    def test_wrong_length(self):
        with self.assertRaises(InvalidArgumentError):
            DGFunction(self.mesh, np.zeros(5))

    def test_vertex_values_and_arithmetic(self):
        values = np.arange(self.mesh.num_vertices, dtype=float)
        function = DGFunction.from_vertex_values(self.mesh, values)
        np.testing.assert_allclose(function.local, values[self.mesh.triangles])
        doubled = 2.0 * function
        np.testing.assert_allclose((doubled - function).coefficients, function.coefficients)
        self.assertEqual(DGFunction.zeros(self.mesh).coefficients.sum(), 0.0)

    def test_evaluate_outside_element(self):
        function = DGFunction.zeros(self.mesh)
        with self.assertRaises(InvalidArgumentError):
            function.evaluate(0, (5.0, 5.0))
        with self.assertRaises(InvalidArgumentError):
            function.evaluate(99, (0.0, 0.0))


if __name__ == '__main__':
    unittest.main()
