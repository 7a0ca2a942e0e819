import unittest
from unittest.mock import patch

from src.engine import validation
from src.engine.dg_space import DGSpace
from src.engine.validation import TRANSPORTS, ValidationSuite, run_validate
from src.models.errors import NumericError
from src.models.mesh import DiagonalRule


class TestValidationSuite(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.report = run_validate("quick")

    def test_quick_suite_passes(self):
        failures = [f"{r.name}: {r.value:.3e}" for r in self.report.failures()]
        self.assertTrue(self.report.passed, msg="; ".join(failures))
        self.assertGreater(self.report.elapsed, 0.0)

    def test_properties_are_reported(self):
        names = [result.name for result in self.report.results]
        self.assertEqual(len(names), len(set(names)))
        for expected in ("trace-selector[h=1/4]", "dwdg-symmetry[h=1/8]", "affine-exactness[h=1/8]",
                         "centered-flux-equivalence[h=1/4,zeta=radial]", "coercivity-upw[h=1/8,zeta=const]",
                         "dense-oracle[h=1/4,corner-safe]", "zero-penalty-solve[interior-arctan,h=1/8]"):
            self.assertIn(expected, names)
        self.assertFalse(any(name.startswith("infsup") for name in names))

    def test_report_dict(self):
        payload = self.report.to_dict()
        self.assertEqual(payload["scale"], "quick")
        self.assertEqual(len(payload["results"]), len(self.report.results))


class TestNegativeControls(unittest.TestCase):
    def setUp(self):
        self.suite = ValidationSuite("quick", samples=10)
        self.space = DGSpace(validation._unit_mesh(4))

    def result(self, name: str):
        return next(r for r in self.suite.report.results if r.name == name)

    def test_flipped_upwind_sign_breaks_coercivity_only(self):
        real = validation.assemble_upwind_penalty
        transport = TRANSPORTS[1]
        with patch("src.engine.validation.assemble_upwind_penalty",
                   side_effect=lambda *args, **kwargs: -real(*args, **kwargs)):
            self.suite.check_calculus_identities(self.space, transport, "mutant")
            self.suite.check_coercivity(self.space, transport, "mutant")
        self.assertTrue(self.result("centered-flux-equivalence[mutant]").passed)
        self.assertTrue(self.result("coercivity-ar[mutant]").passed)
        self.assertFalse(self.result("coercivity-upw[mutant]").passed)

    def test_errors_become_failed_properties(self):
        def broken():
            raise NumericError("matrix is not positive definite")

        self.suite._guarded("broken-check", broken)
        result = self.result("broken-check")
        self.assertFalse(result.passed)
        self.assertIn("positive definite", result.detail)

    def test_dense_oracle_skips_large_meshes(self):
        self.suite.check_dense_oracle(16, DiagonalRule.UNIFORM_NE)
        self.assertEqual(self.suite.report.results, [])
        self.suite.check_dense_oracle(2, DiagonalRule.CORNER_SAFE)
        self.assertTrue(self.result("dense-oracle[h=1/2,corner-safe]").passed)

    def test_infsup_checks(self):
        self.suite.check_infsup()
        names = [r.name for r in self.suite.report.results]
        self.assertEqual(names, ["infsup-symmetric[h=1/4]", "infsup-sweep[boundary-layer,h=1/4]",
                                 "infsup-sweep[boundary-layer,h=1/8]"])
        self.assertTrue(self.suite.report.passed)

    def test_invalid_scale(self):
        with self.assertRaises(ValueError):
            ValidationSuite("huge")


if __name__ == '__main__':
    unittest.main()
