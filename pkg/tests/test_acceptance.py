"""End-to-end rate checks on the catalog examples at h = 1/32 and 1/64.

These are the slow tests: each class runs one convergence study on the
worker pool and asserts observed rates over the two finest levels.
"""
import asyncio
import math
import unittest

import numpy as np

from config import SolverSettings
from src.engine.convergence import ConvergenceStudy
from src.engine.inf_sup import estimate_infsup
from src.engine.pipeline import build_mesh_for, solve_problem
from src.engine.problems import catalog, get_example
from src.models.reports import observed_rate

LEVELS = (1.0 / 32.0, 1.0 / 64.0)
L2_WINDOW = (1.85, 2.15)
ENERGY_WINDOW = (1.35, 1.65)
MAGNITUDE_FACTOR = 3.0


def run_study(problem, sigmas=(5.0,), mask=None):
    study = ConvergenceStudy(problem, LEVELS, sigmas=sigmas, mask=mask, settings=SolverSettings(workers=2),
                             norms=("l2", "h", "h_sharp"))
    try:
        report = asyncio.run(study.run())
    finally:
        study.close()
    return report, study


def global_rate(study, name: str, sigma: float = 5.0) -> float:
    coarse, fine = sorted((r for r in study.results if r.penalty.sigma == sigma), key=lambda r: -r.h)
    return observed_rate(coarse.errors[name], fine.errors[name], coarse.h, fine.h)


class RateAssertions(unittest.TestCase):
    def assertInWindow(self, value, window, label):
        self.assertIsNotNone(value, msg=label)
        self.assertGreaterEqual(value, window[0], msg=f"{label} rate {value:.3f}")
        self.assertLessEqual(value, window[1], msg=f"{label} rate {value:.3f}")

    def assertLocalRates(self, report, sigma=5.0):
        self.assertEqual(report.metadata["failures"], [])
        self.assertInWindow(report.final_rate("l2", sigma), L2_WINDOW, f"L2 sigma={sigma:g}")
        self.assertInWindow(report.final_rate("h", sigma), ENERGY_WINDOW, f"h sigma={sigma:g}")
        self.assertInWindow(report.final_rate("h_sharp", sigma), ENERGY_WINDOW, f"h# sigma={sigma:g}")


class TestSmoothSolution(RateAssertions):
    @classmethod
    def setUpClass(cls):
        cls.report, cls.study = run_study(get_example("smooth"), sigmas=(0.0, 5.0))

    def test_rates_for_both_penalties(self):
        for sigma in (0.0, 5.0):
            self.assertLocalRates(self.report, sigma)

    def test_penalties_agree(self):
        for zero, five in zip(self.report.rows_for(0.0), self.report.rows_for(5.0)):
            for name in ("l2", "h", "h_sharp"):
                gap = abs(zero.errors[name] - five.errors[name]) / five.errors[name]
                self.assertLessEqual(gap, 0.05, msg=f"{name} at h={five.h:g}")

    def test_error_magnitudes(self):
        finest = self.report.rows_for(5.0)[-1]
        for name, reference in (("l2", 3.73e-5), ("h", 4.86e-4), ("h_sharp", 9.64e-4)):
            ratio = finest.errors[name] / reference
            self.assertLessEqual(abs(math.log(ratio)), math.log(MAGNITUDE_FACTOR),
                                 msg=f"{name}: {finest.errors[name]:.3e} vs {reference:.3e}")


class TestBoundaryLayer(RateAssertions):
    @classmethod
    def setUpClass(cls):
        mask = catalog()["boundary-layer"].local_mask
        cls.report, cls.study = run_study(get_example("boundary-layer", 1e-9), mask=mask)

    def test_rates_away_from_layer(self):
        self.assertLocalRates(self.report)

    def test_global_energy_error_stagnates(self):
        self.assertLessEqual(global_rate(self.study, "h"), 0.3)
        self.assertInWindow(global_rate(self.study, "l2"), L2_WINDOW, "global L2")


class TestInteriorArctanLayer(RateAssertions):
    @classmethod
    def setUpClass(cls):
        mask = catalog()["interior-arctan"].local_mask
        cls.report, cls.study = run_study(get_example("interior-arctan", 1e-9), mask=mask)

    def test_rates_away_from_layer(self):
        self.assertLocalRates(self.report)

    def test_global_rates_deteriorate(self):
        self.assertLessEqual(global_rate(self.study, "h"), 0.7)


class TestInteriorDiscontinuity(unittest.TestCase):
    def test_bounded_overshoot(self):
        problem = get_example("interior-discont", 1e-9)
        result = solve_problem(problem, h=1.0 / 32.0)
        values = result.solution.coefficients
        self.assertTrue(np.all(np.isfinite(values)))
        self.assertGreaterEqual(values.min(), -0.3)
        self.assertLessEqual(values.max(), 1.3)


class TestInfSupSweep(unittest.TestCase):
    def test_no_collapse_under_refinement(self):
        problem = get_example("boundary-layer", 1e-9)
        settings = SolverSettings()
        estimates = [estimate_infsup(build_mesh_for(problem, h, settings), problem).value
                     for h in (1.0 / 4.0, 1.0 / 8.0, 1.0 / 16.0)]
        self.assertTrue(all(value > 0.0 for value in estimates))
        for coarse, fine in zip(estimates, estimates[1:]):
            self.assertGreaterEqual(fine / coarse, 0.5)


if __name__ == '__main__':
    unittest.main()
