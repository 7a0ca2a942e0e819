import logging
import time
from enum import Enum
from typing import Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, gmres, spilu, splu

from src.models.errors import ConvergenceError, InvalidArgumentError, SolverError
from src.models.reports import SolveReport

logger = logging.getLogger("LinearSolver")


class SolverMethod(Enum):
    DIRECT = "direct"
    ITERATIVE = "iterative"


def _relative_residual(matrix: sp.spmatrix, x: np.ndarray, b: np.ndarray) -> float:
    b_norm = np.linalg.norm(b)
    r_norm = np.linalg.norm(matrix @ x - b)
    return float(r_norm / b_norm) if b_norm > 0 else float(r_norm)


def solve(matrix: sp.spmatrix, b: np.ndarray, method: Union[SolverMethod, str] = SolverMethod.DIRECT,
          direct_tolerance: float = 1e-10, iterative_tolerance: float = 1e-8,
          restart: int = 50, max_iterations: int = 2000,
          pivot_threshold: float = 1e-14) -> Tuple[np.ndarray, SolveReport]:
    """Solve A u = b; the reported residual is recomputed from the returned u"""
    method = SolverMethod(method)
    matrix = sp.csc_matrix(matrix)
    b = np.asarray(b, dtype=float)
    n, m = matrix.shape
    if n != m or b.shape != (n,):
        raise InvalidArgumentError(f"Incompatible system: matrix {matrix.shape}, rhs {b.shape}")

    start = time.perf_counter()
    if not np.any(b):
        report = SolveReport(method.value, n, 0.0, time.perf_counter() - start)
        return np.zeros(n), report

    if method is SolverMethod.DIRECT:
        x, report = _solve_direct(matrix, b, direct_tolerance, pivot_threshold)
    else:
        x, report = _solve_iterative(matrix, b, iterative_tolerance, restart, max_iterations)
    report.wall_time = time.perf_counter() - start
    logger.info(f"{method.value} solve: {n} dofs, residual {report.relative_residual:.2e}, "
                f"{report.wall_time:.3f}s")
    return x, report


def _solve_direct(matrix: sp.csc_matrix, b: np.ndarray, tolerance: float,
                  pivot_threshold: float) -> Tuple[np.ndarray, SolveReport]:
    try:
        lu = splu(matrix, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SolverError(f"Sparse LU failed: {exc}")
    pivots = np.abs(lu.U.diagonal())
    worst = int(np.argmin(pivots))
    min_pivot, max_pivot = float(pivots[worst]), float(pivots.max())
    if max_pivot == 0.0 or min_pivot <= pivot_threshold * max_pivot:
        raise SolverError("Near-singular factorization", min_pivot, max_pivot, worst)

    x = lu.solve(b)
    residual = _relative_residual(matrix, x, b)
    if not np.isfinite(residual) or residual > tolerance:
        raise SolverError(f"Direct solve residual {residual:.3e} exceeds {tolerance:.1e}",
                          min_pivot, max_pivot, worst)
    report = SolveReport("direct", matrix.shape[0], residual, 0.0,
                         factor_nnz=int(lu.L.nnz + lu.U.nnz), min_pivot=min_pivot, max_pivot=max_pivot)
    return x, report


def _solve_iterative(matrix: sp.csc_matrix, b: np.ndarray, tolerance: float, restart: int,
                     max_iterations: int) -> Tuple[np.ndarray, SolveReport]:
    try:
        ilu = spilu(matrix, drop_tol=1e-6, fill_factor=20)
    except RuntimeError as exc:
        raise SolverError(f"Incomplete factorization failed: {exc}")
    preconditioner = LinearOperator(matrix.shape, ilu.solve)

    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    # Tighter inner tolerance so the true residual also meets the target
    x, info = gmres(matrix, b, rtol=0.1 * tolerance, atol=0.0, restart=restart,
                    maxiter=max(1, max_iterations // restart), M=preconditioner,
                    callback=count, callback_type="pr_norm")
    residual = _relative_residual(matrix, x, b)
    if not np.isfinite(residual) or residual > tolerance:
        raise ConvergenceError(f"GMRES did not converge (info={info})", x, residual, iterations)
    report = SolveReport("iterative", matrix.shape[0], residual, 0.0, iterations=iterations,
                         factor_nnz=int(ilu.L.nnz + ilu.U.nnz))
    return x, report
