import unittest
from unittest.mock import patch

import numpy as np
import scipy.sparse as sp

from src.engine.assembly import assemble_full
from src.engine.linear_solver import SolverMethod, solve
from src.engine.mesh_builder import generate_structured_rect
from src.engine.problems import example_boundary_layer
from src.models.errors import ConvergenceError, InvalidArgumentError, SolverError
from src.models.mesh import Rectangle


class TestLinearSolver(unittest.TestCase):
    def setUp(self):
        problem = example_boundary_layer(1e-3)
        mesh = generate_structured_rect(Rectangle(0.0, 0.0, 1.0, 1.0), 8, 8)
        self.forms = assemble_full(mesh, problem)

    def test_direct_solve(self):
        x, report = solve(self.forms.total, self.forms.rhs)
        self.assertEqual(report.method, "direct")
        self.assertEqual(report.dofs, 384)
        self.assertLess(report.relative_residual, 1e-10)
        self.assertGreater(report.factor_nnz, 0)
        self.assertGreater(report.min_pivot, 0.0)
        residual = np.linalg.norm(self.forms.total @ x - self.forms.rhs) / np.linalg.norm(self.forms.rhs)
        self.assertAlmostEqual(residual, report.relative_residual)

    def test_iterative_matches_direct(self):
        direct, _ = solve(self.forms.total, self.forms.rhs, SolverMethod.DIRECT)
        iterative, report = solve(self.forms.total, self.forms.rhs, "iterative")
        self.assertEqual(report.method, "iterative")
        self.assertLess(report.relative_residual, 1e-8)
        np.testing.assert_allclose(iterative, direct, atol=1e-4 * np.abs(direct).max())

    def test_zero_rhs(self):
        x, report = solve(sp.identity(4, format="csr"), np.zeros(4))
        np.testing.assert_array_equal(x, np.zeros(4))
        self.assertEqual(report.relative_residual, 0.0)

    def test_incompatible_shapes(self):
        with self.assertRaises(InvalidArgumentError):
            solve(sp.identity(4, format="csr"), np.ones(3))

    def test_singular_matrix(self):
        matrix = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
        with self.assertRaises(SolverError):
            solve(matrix, np.ones(2))

    def test_near_singular_pivot(self):
        matrix = sp.diags([1.0, 1e-20]).tocsr()
        with self.assertRaises(SolverError) as ctx:
            solve(matrix, np.ones(2))
        self.assertAlmostEqual(ctx.exception.min_pivot, 1e-20)
        self.assertEqual(ctx.exception.max_pivot, 1.0)

    def test_stalled_gmres_keeps_best_iterate(self):
        stalled = np.zeros(self.forms.num_dofs)
        with patch("src.engine.linear_solver.gmres", return_value=(stalled, 1)):
            with self.assertRaises(ConvergenceError) as ctx:
                solve(self.forms.total, self.forms.rhs, "iterative")
        np.testing.assert_array_equal(ctx.exception.best_iterate, stalled)
        self.assertAlmostEqual(ctx.exception.residual, 1.0)


if __name__ == '__main__':
    unittest.main()
