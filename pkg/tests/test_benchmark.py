import inspect
import unittest

from config import SolverSettings
from performance import benchmark


class TestBenchmark(unittest.TestCase):
    def test_level_timings_are_returned_directly(self):
        self.assertFalse(inspect.iscoroutinefunction(benchmark.run_benchmark))
        self.assertFalse(inspect.iscoroutinefunction(benchmark.main))

        row = benchmark.run_benchmark("smooth", 0.25, SolverSettings())
        self.assertEqual(row["example"], "smooth")
        self.assertEqual(row["dofs"], 384)
        self.assertGreater(row["nnz"], 0)
        for key in ("mesh_time", "assembly_time", "direct_time"):
            self.assertGreaterEqual(row[key], 0.0, msg=key)


if __name__ == '__main__':
    unittest.main()
