import json
import os
import sys
import time

import numpy as np

# Add project path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config import SolverSettings
from src.engine.assembly import assemble_full
from src.engine.dg_space import DGSpace
from src.engine.linear_solver import solve
from src.engine.pipeline import build_mesh_for
from src.engine.problems import get_example
from src.models.errors import ConvergenceError
from src.models.reports import SolveReport

# Fixed seed for the random right-hand sides of the iterative solve
RANDOM_SEED = 42
LEVELS = [1 / 8, 1 / 16, 1 / 32, 1 / 64]


def run_benchmark(example: str, h: float, settings: SolverSettings):
    """Time meshing, assembly and both solvers for one level"""
    problem = get_example(example)
    print(f"\n🔹 {example} at h=1/{round(1 / h)}...")

    start = time.perf_counter()
    mesh = build_mesh_for(problem, h, settings)
    space = DGSpace(mesh, settings.assembly_degree)
    mesh_time = time.perf_counter() - start

    start = time.perf_counter()
    forms = assemble_full(space, problem, path=settings.path)
    assembly_time = time.perf_counter() - start

    _, direct = solve(forms.total, forms.rhs, "direct")
    rng = np.random.default_rng(RANDOM_SEED)
    try:
        _, iterative = solve(forms.total, rng.standard_normal(space.num_dofs), "iterative")
    except ConvergenceError as exc:
        print(f"⚠️ GMRES stopped at residual {exc.residual:.2e} after {exc.iterations} iterations")
        iterative = SolveReport("iterative", space.num_dofs, exc.residual, float("nan"), exc.iterations)

    print(f"✅ {space.num_dofs:,} dofs, {forms.total.nnz:,} nonzeros")
    print(f"➡ Assembly: {assembly_time:.3f}s, direct solve: {direct.wall_time:.3f}s, "
          f"GMRES: {iterative.wall_time:.3f}s ({iterative.iterations} iterations)")
    return {
        "example": example,
        "h": h,
        "dofs": space.num_dofs,
        "nnz": int(forms.total.nnz),
        "mesh_time": mesh_time,
        "assembly_time": assembly_time,
        "direct_time": direct.wall_time,
        "factor_nnz": direct.factor_nnz,
        "iterative_time": iterative.wall_time,
        "iterations": iterative.iterations,
    }


def main():
    print("=== DG Assembly and Solve Benchmark ===")
    print(f"Random seed: {RANDOM_SEED}")
    settings = SolverSettings.from_env()
    results = []
    for example in ("smooth", "boundary-layer"):
        for h in LEVELS:
            results.append(run_benchmark(example, h, settings))

    print("\n=== 📊 Benchmark Summary ===")
    print(f"{'Example':>15} | {'h':>6} | {'Dofs':>8} | {'Assembly (s)':>12} | {'Direct (s)':>10} | {'GMRES (s)':>9}")
    print("-" * 75)
    for r in results:
        print(f"{r['example']:>15} | 1/{round(1 / r['h']):<4d} | {r['dofs']:>8,} | {r['assembly_time']:>12.3f} | "
              f"{r['direct_time']:>10.3f} | {r['iterative_time']:>9.3f}")

    filename = f"benchmark_results_{time.strftime('%Y%m%d_%H%M%S')}.json"
    with open(filename, "w") as handle:
        json.dump(results, handle, indent=2)
    print(f"\n✅ Results saved to {filename}")


if __name__ == "__main__":
    main()
