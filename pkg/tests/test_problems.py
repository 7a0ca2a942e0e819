import unittest

import numpy as np

from src.engine.problems import (catalog, check_derivatives, example_boundary_layer,
                                 example_interior_layer_arctan, example_names, example_smooth,
                                 get_example, interior_layer_data, manufactured, safe_exp)
from src.models.errors import InvalidArgumentError
from src.models.mesh import Rectangle
from src.models.problem import PenaltyPolicy, ProblemSpec, constant_scalar, constant_vector


class TestExamples(unittest.TestCase):
    def test_catalog(self):
        self.assertEqual(example_names(), ["smooth", "boundary-layer", "interior-discont", "interior-arctan"])
        presets = catalog()
        self.assertEqual(presets["boundary-layer"].local_mask, Rectangle(0.0, 0.0, 0.875, 0.875))
        self.assertEqual(presets["interior-arctan"].local_mask, Rectangle(0.0, 0.625, 1.0, 1.0))
        self.assertEqual(presets["interior-discont"].profile, "x1=0")

    def test_get_example(self):
        problem = get_example("smooth")
        self.assertEqual(problem.eps, 1e-9)
        self.assertEqual(problem.domain, Rectangle(1.0, 0.0, 3.0, 2.0))
        self.assertEqual(get_example("interior-arctan", 1e-3).eps, 1e-3)
        with self.assertRaises(InvalidArgumentError):
            get_example("no-such-example")

    def test_smooth_derivatives(self):
        self.assertLess(check_derivatives(example_smooth()), 1e-4)

    def test_arctan_derivatives(self):
        self.assertLess(check_derivatives(example_interior_layer_arctan(1.0)), 1e-4)

    def test_boundary_layer_derivatives(self):
        self.assertLess(check_derivatives(example_boundary_layer(0.1)), 1e-4)

    def test_sources_match_exact_solutions(self):
        for problem in (example_smooth(1e-3), example_boundary_layer(1e-2), example_boundary_layer(1e-9),
                        example_interior_layer_arctan(1e-3)):
            x, y = problem.sample_grid(7)
            self.assertLessEqual(problem.verify_manufactured(x, y), 1e-10, msg=problem.name)

    def test_boundary_layer_values(self):
        problem = example_boundary_layer(1e-9)
        # u vanishes on the outflow sides and equals x1 + x2 (1 - x1) away from them
        self.assertAlmostEqual(float(problem.exact(1.0, 0.3)), 0.0)
        self.assertAlmostEqual(float(problem.exact(0.4, 1.0)), 0.0)
        self.assertAlmostEqual(float(problem.exact(0.5, 0.5)), 0.75)

    def test_interior_layer_data(self):
        x = np.array([0.5, 0.0, 0.0, 1.0, 0.0])
        y = np.array([0.0, 0.1, 0.5, 0.5, 0.2])
        np.testing.assert_array_equal(interior_layer_data(x, y), [1.0, 1.0, 0.0, 0.0, 1.0])

    def test_with_eps_rebuilds_manufactured_source(self):
        problem = example_interior_layer_arctan(1.0).with_eps(1e-2)
        self.assertEqual(problem.eps, 1e-2)
        x, y = problem.sample_grid(6)
        problem.verify_manufactured(x, y)

    def test_examples_with_exact_solutions_are_manufactured(self):
        for name in ("smooth", "boundary-layer", "interior-arctan"):
            self.assertTrue(get_example(name).manufactured, msg=name)
        self.assertFalse(get_example("interior-discont").manufactured)

    def test_with_eps_rebuilds_exact_solution(self):
        problem = example_boundary_layer(1e-9).with_penalty(PenaltyPolicy.zero()).with_eps(0.1)
        reference = example_boundary_layer(0.1)
        x, y = problem.sample_grid(6)
        np.testing.assert_allclose(problem.exact(x, y), reference.exact(x, y))
        np.testing.assert_allclose(problem.f(x, y), reference.f(x, y))
        problem.verify_manufactured(x, y)
        self.assertTrue(problem.penalty.is_zero)

    def test_missing_derivatives(self):
        with self.assertRaises(InvalidArgumentError):
            check_derivatives(get_example("interior-discont"))

    def test_wrong_gradient_is_caught(self):
        problem = manufactured("bad", u=lambda x, y: x ** 2, gradient=lambda x, y: (x, 0.0 * y),
                               laplacian=constant_scalar(2.0), zeta=constant_vector(1.0, 0.0),
                               div_zeta=constant_scalar(0.0), gamma=constant_scalar(0.0), eps=1e-3,
                               domain=Rectangle(0.0, 0.0, 1.0, 1.0))
        with self.assertRaises(InvalidArgumentError):
            check_derivatives(problem)


class TestProblemModel(unittest.TestCase):
    def test_safe_exp(self):
        self.assertEqual(float(safe_exp(-800.0)), 0.0)
        self.assertEqual(float(safe_exp(-700.0)), 0.0)
        self.assertEqual(float(safe_exp(0.0)), 1.0)
        np.testing.assert_allclose(safe_exp(np.array([1.0, -1e12])), [np.e, 0.0])

    def test_penalty_policy(self):
        self.assertTrue(PenaltyPolicy.zero().is_zero)
        self.assertEqual(PenaltyPolicy.constant(5).label(), "5")
        with self.assertRaises(InvalidArgumentError):
            PenaltyPolicy(-1.0)

    def test_negative_eps(self):
        with self.assertRaises(InvalidArgumentError):
            ProblemSpec("bad", Rectangle(0.0, 0.0, 1.0, 1.0), -1.0, constant_vector(1.0, 0.0),
                        constant_scalar(0.0), constant_scalar(0.0), constant_scalar(0.0), constant_scalar(0.0))

    def test_inconsistent_source(self):
        problem = example_smooth(1e-3)
        broken = ProblemSpec("broken", problem.domain, problem.eps, problem.zeta, problem.div_zeta,
                             problem.gamma, constant_scalar(1.0), problem.g, problem.exact,
                             problem.exact_gradient, problem.exact_laplacian)
        x, y = broken.sample_grid()
        with self.assertRaises(InvalidArgumentError):
            broken.verify_manufactured(x, y)


if __name__ == '__main__':
    unittest.main()
