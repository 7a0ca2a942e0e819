import json
import logging
import math
import os
import tempfile
import unittest
from unittest.mock import patch

import scipy.io

from src.api.cli import (DEFAULT_SOLVE_H, default_solve_h, parse_levels, parse_sigmas, resolve_mask,
                         resolve_problem)
from src.main import main
from src.models.errors import InvalidArgumentError
from src.models.mesh import Rectangle


class TestArgumentHelpers(unittest.TestCase):
    def test_parse_levels(self):
        self.assertEqual(parse_levels("1/4, 1/8,0.0625"), [0.25, 0.125, 0.0625])
        for text in ("", "1/0", "quarter", "-1/4"):
            with self.assertRaises(InvalidArgumentError, msg=text):
                parse_levels(text)

    def test_parse_sigmas(self):
        self.assertEqual(parse_sigmas("0,5"), [0.0, 5.0])
        for text in ("", "a", "-1"):
            with self.assertRaises(InvalidArgumentError, msg=text):
                parse_sigmas(text)

    def test_resolve_mask(self):
        self.assertIsNone(resolve_mask(None, "smooth"))
        self.assertIsNone(resolve_mask("none", "smooth"))
        self.assertEqual(resolve_mask("preset", "boundary-layer"), Rectangle(0.0, 0.0, 0.875, 0.875))
        self.assertEqual(resolve_mask("0,0,0.5,1", None), Rectangle(0.0, 0.0, 0.5, 1.0))
        with self.assertRaises(InvalidArgumentError):
            resolve_mask("preset", "smooth")
        with self.assertRaises(InvalidArgumentError):
            resolve_mask("0,0,1", None)

    def test_resolve_problem(self):
        self.assertEqual(resolve_problem("smooth", None, 1e-3).eps, 1e-3)
        with self.assertRaises(InvalidArgumentError):
            resolve_problem(None, None, None)

    def test_eps_override_recompiles_config(self):
        config = {
            "name": "shifted-arctan",
            "domain": [0, 0, 1, 1],
            "eps": 0.1,
            "zeta": ["1", "0"],
            "div_zeta": "0",
            "exact": "atan((y-0.5)/eps)",
            "exact_gradient": ["0", "eps/(eps^2+(y-0.5)^2)"],
            "exact_laplacian": "-2*eps*(y-0.5)/(eps^2+(y-0.5)^2)^2",
        }
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "problem.json")
            with open(path, "w") as fh:
                json.dump(config, fh)
            problem = resolve_problem(None, path, 0.01)
        self.assertEqual(problem.eps, 0.01)
        self.assertAlmostEqual(float(problem.exact(0.5, 0.51)), math.atan(1.0))
        x, y = problem.sample_grid(6)
        problem.verify_manufactured(x, y)

        relaxed = problem.with_eps(1.0)
        self.assertAlmostEqual(float(relaxed.exact(0.5, 0.51)), math.atan(0.01))

    def test_default_solve_h(self):
        self.assertEqual(default_solve_h("interior-discont"), 1.0 / 128.0)
        self.assertEqual(default_solve_h("smooth"), 1.0 / 128.0)
        self.assertEqual(default_solve_h(None), DEFAULT_SOLVE_H)


class TestCommands(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = self.tmp.name

    def tearDown(self):
        root = logging.getLogger()
        for handler in list(root.handlers):
            handler.close()
            root.removeHandler(handler)
        self.tmp.cleanup()

    def path(self, *parts: str) -> str:
        return os.path.join(self.out, *parts)

    def read_json(self, name: str) -> dict:
        with open(self.path(name)) as fh:
            return json.load(fh)

    def test_solve_writes_outputs(self):
        status = main(["solve", "--example", "smooth", "--h", "1/4", "--sigma", "5", "--out", self.out])
        self.assertEqual(status, 0)
        for name in ("solution.csv", "solution.vtk", "report.json", "dgcdr.log"):
            self.assertTrue(os.path.exists(self.path(name)), name)

        report = self.read_json("report.json")
        self.assertEqual(report["problem"], "smooth")
        self.assertEqual(report["h"], 0.25)
        self.assertEqual(report["solver"]["dofs"], 384)
        self.assertLess(report["errors"]["l2"], 0.1)

        with open(self.path("solution.csv"), "rb") as fh:
            first = fh.read()
        self.assertEqual(main(["solve", "--example", "smooth", "--h", "1/4", "--sigma", "5",
                               "--out", self.out]), 0)
        with open(self.path("solution.csv"), "rb") as fh:
            self.assertEqual(fh.read(), first)

    def test_solve_default_profile_and_dumps(self):
        status = main(["solve", "--example", "interior-discont", "--h", "1/8", "--dump-system",
                       "--dump-operator", "--out", self.out])
        self.assertEqual(status, 0)
        with open(self.path("profile.csv")) as fh:
            self.assertEqual(fh.readline().strip(), "x2,value,element")
        matrix = scipy.io.mmread(self.path("system.mtx"))
        self.assertEqual(matrix.shape, (384, 384))
        for name in ("partial_plus_x1.mtx", "partial_minus_x2.mtx", "div_zeta_avg.mtx", "system_rhs.txt"):
            self.assertTrue(os.path.exists(self.path(name)), name)
        self.assertIsNone(self.read_json("report.json")["errors"])

    def test_solve_without_h_uses_figure_spacing(self):
        with patch("src.api.cli.run_solve") as run_solve:
            status = main(["solve", "--example", "interior-discont", "--out", self.out])
        self.assertEqual(status, 0)
        h = run_solve.call_args.args[1]
        self.assertEqual(h, 1.0 / 128.0)
        self.assertEqual(run_solve.call_args.args[6], "x1=0")

    def test_convergence_command(self):
        status = main(["convergence", "--example", "smooth", "--levels", "1/2,1/4", "--sigma", "5",
                       "--norms", "l2,h,h_sharp", "--out", self.out])
        self.assertEqual(status, 0)
        with open(self.path("convergence.csv")) as fh:
            self.assertEqual(len(fh.read().splitlines()), 3)
        with open(self.path("convergence.md")) as fh:
            self.assertIn("h# error", fh.read())
        self.assertEqual(len(self.read_json("report.json")["solves"]), 2)

    def test_max_level_drops_fine_levels(self):
        status = main(["convergence", "--example", "smooth", "--levels", "1/2,1/4", "--sigma", "5",
                       "--max-level", "1/2", "--out", self.out])
        self.assertEqual(status, 0)
        self.assertEqual(len(self.read_json("report.json")["solves"]), 1)

    def test_infsup_command(self):
        status = main(["infsup", "--example", "boundary-layer", "--levels", "1/4", "--out", self.out])
        self.assertEqual(status, 0)
        rows = self.read_json("infsup.json")["rows"]
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]["dofs"], 96)
        self.assertGreater(rows[0]["infsup"], 0.0)

    def test_mesh_command_with_export(self):
        status = main(["mesh", "--h", "1/4", "--sigma-zero", "--export", "square", "--out", self.out])
        self.assertEqual(status, 0)
        self.assertEqual(self.read_json("mesh.json")["triangles"], 32)
        self.assertTrue(os.path.exists(self.path("square.node")))
        self.assertTrue(os.path.exists(self.path("square.ele")))

        status = main(["solve", "--config", self.path("missing.json"), "--mesh-file", self.path("square"),
                       "--out", self.out])
        self.assertEqual(status, 1)

    def test_failures_exit_with_one(self):
        self.assertEqual(main(["solve", "--out", self.out]), 1)
        self.assertEqual(main(["solve", "--example", "smooth", "--quad-assembly", "5", "--out", self.out]), 1)
        self.assertEqual(main(["convergence", "--example", "interior-discont", "--out", self.out]), 1)


if __name__ == '__main__':
    unittest.main()
