import json
import os
import tempfile
import unittest

import numpy as np

from src.engine.expressions import (compile_expression, compile_vector, load_problem_config,
                                    problem_from_config)
from src.models.errors import InvalidArgumentError
from src.models.mesh import Rectangle


def transport_config(**overrides):
    config = {
        "name": "tilted",
        "domain": [0, 0, 1, 1],
        "eps": 0.01,
        "zeta": ["1", "0.5"],
        "div_zeta": "0",
        "gamma": "1",
        "exact": "x + y^2",
        "exact_gradient": ["1", "2*y"],
        "exact_laplacian": "2",
        "sigma": 3,
    }
    config.update(overrides)
    return config


class TestCompileExpression(unittest.TestCase):
    def test_arithmetic(self):
        field = compile_expression("x^2 + 2*y - x1*x2")
        x = np.array([1.0, 2.0])
        y = np.array([3.0, -1.0])
        np.testing.assert_allclose(field(x, y), x ** 2 + 2 * y - x * y)

    def test_functions_and_constants(self):
        field = compile_expression("exp(-x/eps) + atan(y) + sqrt(pi)", eps=0.5)
        expected = np.exp(-2.0) + np.arctan(0.5) + np.sqrt(np.pi)
        self.assertAlmostEqual(float(field(np.array(1.0), np.array(0.5))), expected)

    def test_constants_broadcast(self):
        np.testing.assert_allclose(compile_expression("3")(np.zeros((2, 2)), np.zeros((2, 2))), 3.0)
        np.testing.assert_allclose(compile_expression(1.5)(np.zeros(4), np.zeros(4)), 1.5)

    def test_rejects_unknown_names(self):
        for text in ("open(x)", "x.real", "z + 1", "__import__"):
            with self.assertRaises(InvalidArgumentError, msg=text):
                compile_expression(text)

    def test_rejects_unsupported_characters(self):
        for text in ("'a'", "x; y", "x[0]", "lambda: 1", ""):
            with self.assertRaises(InvalidArgumentError, msg=text):
                compile_expression(text)

    def test_rejects_malformed_syntax(self):
        with self.assertRaises(InvalidArgumentError):
            compile_expression("x * / y")

    def test_vector(self):
        field = compile_vector(["y", "-x"])
        first, second = field(np.array([1.0]), np.array([2.0]))
        np.testing.assert_allclose(first, [2.0])
        np.testing.assert_allclose(second, [-1.0])
        with self.assertRaises(InvalidArgumentError):
            compile_vector("y")


class TestProblemConfig(unittest.TestCase):
    def test_manufactured_config(self):
        problem = problem_from_config(transport_config())
        self.assertEqual(problem.name, "tilted")
        self.assertEqual(problem.domain, Rectangle(0.0, 0.0, 1.0, 1.0))
        self.assertEqual(problem.penalty.sigma, 3.0)
        self.assertTrue(problem.manufactured)
        # f = -eps * 2 + (1, 0.5) . (1, 2y) + (x + y^2)
        x, y = np.array([0.5]), np.array([0.5])
        np.testing.assert_allclose(problem.f(x, y), -0.02 + 1.0 + 0.5 + 0.75)

    def test_config_with_data(self):
        config = {"domain": [0, 0, 2, 1], "eps": 0, "zeta": ["1", "1"], "div_zeta": "0",
                  "f": "1", "g": "0"}
        problem = problem_from_config(config)
        self.assertFalse(problem.has_exact)
        self.assertTrue(problem.is_reduced)
        self.assertEqual(problem.penalty.sigma, 5.0)

    def test_eps_override_reaches_every_field(self):
        config = {"domain": [0, 0, 1, 1], "eps": 0.5, "zeta": ["eps", "0"], "div_zeta": "0",
                  "f": "1/eps", "g": "eps"}
        x, y = np.array([0.3]), np.array([0.7])
        for problem in (problem_from_config(config, eps=0.25), problem_from_config(config).with_eps(0.25)):
            self.assertEqual(problem.eps, 0.25)
            np.testing.assert_allclose(problem.zeta(x, y)[0], 0.25)
            np.testing.assert_allclose(problem.f(x, y), 4.0)
            np.testing.assert_allclose(problem.g(x, y), 0.25)

    def test_missing_keys(self):
        with self.assertRaises(InvalidArgumentError):
            problem_from_config({"domain": [0, 0, 1, 1], "eps": 0.1})
        with self.assertRaises(InvalidArgumentError):
            problem_from_config({"domain": [0, 0, 1, 1], "eps": 0.1, "zeta": ["1", "0"], "div_zeta": "0"})
        config = transport_config()
        del config["exact_laplacian"]
        with self.assertRaises(InvalidArgumentError):
            problem_from_config(config)

    def test_inconsistent_divergence(self):
        with self.assertRaises(InvalidArgumentError):
            problem_from_config(transport_config(div_zeta="1"))

    def test_inconsistent_derivatives(self):
        with self.assertRaises(InvalidArgumentError):
            problem_from_config(transport_config(exact_gradient=["1", "y"]))

    def test_bad_domain(self):
        with self.assertRaises(InvalidArgumentError):
            problem_from_config(transport_config(domain=[0, 0, "one", 1]))

    def test_load_from_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "problem.json")
            with open(path, "w") as fh:
                json.dump(transport_config(), fh)
            problem = load_problem_config(path)
            overridden = load_problem_config(path, eps=0.1)
        self.assertEqual(problem.eps, 0.01)
        self.assertEqual(overridden.eps, 0.1)
        x, y = np.array([0.5]), np.array([0.5])
        np.testing.assert_allclose(overridden.f(x, y), -0.2 + 1.0 + 0.5 + 0.75)

    def test_invalid_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            broken = os.path.join(tmp, "broken.json")
            with open(broken, "w") as fh:
                fh.write("{not json")
            with self.assertRaises(InvalidArgumentError):
                load_problem_config(broken)
            listed = os.path.join(tmp, "list.json")
            with open(listed, "w") as fh:
                json.dump([1, 2], fh)
            with self.assertRaises(InvalidArgumentError):
                load_problem_config(listed)


if __name__ == '__main__':
    unittest.main()
