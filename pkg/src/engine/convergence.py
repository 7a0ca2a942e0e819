import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

from config import SolverSettings
from src.engine.mesh_builder import subdomain_mask
from src.engine.pipeline import SolveResult, build_mesh_for, solve_problem
from src.models.errors import CapabilityError, DGError, InvalidArgumentError
from src.models.mesh import Rectangle
from src.models.problem import PenaltyPolicy, ProblemSpec
from src.models.reports import NORM_NAMES, ConvergenceReport, ConvergenceRow


class ConvergenceStudy:
    """One solve per (sigma, h) pair, run on a worker pool and reported in a fixed order"""

    def __init__(self, problem: ProblemSpec, levels: Sequence[float], sigmas: Sequence[float] = (0.0, 5.0),
                 mask: Optional[Rectangle] = None, settings: Optional[SolverSettings] = None,
                 norms: Sequence[str] = NORM_NAMES):
        if not problem.has_exact:
            raise CapabilityError(f"exact solution for error norms of problem {problem.name}")
        unknown = [name for name in norms if name not in NORM_NAMES]
        if unknown:
            raise InvalidArgumentError(f"Unknown norms: {', '.join(unknown)}")
        self.problem = problem
        self.levels = sorted((float(h) for h in levels), reverse=True)
        self.sigmas = [float(s) for s in sigmas]
        self.mask = mask
        self.settings = settings or SolverSettings()
        self.norms = list(norms)
        self.failures: List[str] = []
        self.results: List[SolveResult] = []
        self.thread_pool = ThreadPoolExecutor(max_workers=self.settings.workers)
        self.logger = logging.getLogger("ConvergenceStudy")

    def _solve_level(self, h: float, sigma: float) -> SolveResult:
        mesh = build_mesh_for(self.problem, h, self.settings)
        mask = None if self.mask is None else subdomain_mask(mesh, self.mask)
        return solve_problem(self.problem, penalty=PenaltyPolicy.constant(sigma), settings=self.settings,
                             mesh=mesh, mask=mask)

    async def run(self) -> ConvergenceReport:
        jobs = [(sigma, level, h) for sigma in self.sigmas for level, h in enumerate(self.levels)]
        self.logger.info(f"Running {len(jobs)} solves of {self.problem.name} on {self.settings.workers} workers")

        loop = asyncio.get_event_loop()
        futures = [loop.run_in_executor(self.thread_pool, self._solve_level, h, sigma) for sigma, _, h in jobs]
        outcomes = await asyncio.gather(*futures, return_exceptions=True)

        rows = []
        for (sigma, level, h), outcome in zip(jobs, outcomes):
            if isinstance(outcome, (DGError, ArithmeticError, ValueError)):
                message = f"sigma={sigma:g}, h={h:g}: {outcome}"
                self.failures.append(message)
                self.logger.error(f"Solve failed for {message}")
                continue
            if isinstance(outcome, BaseException):
                raise outcome
            self.results.append(outcome)
            norms = outcome.local_errors if self.mask is not None else outcome.errors
            rows.append(ConvergenceRow(
                h=outcome.h,
                sigma=sigma,
                errors={name: float(norms[name]) for name in self.norms},
                saturated=norms.quadrature_saturated,
                residual=outcome.report.relative_residual,
                level=level,
            ))

        report = ConvergenceReport(
            example=self.problem.name,
            eps=self.problem.eps,
            rows=rows,
            norms=self.norms,
            metadata={
                "levels": list(self.levels),
                "mask": None if self.mask is None else list(self.mask.as_tuple()),
                "mesh_rule": self.settings.mesh_rule,
                "path": self.settings.path,
                "quad_assembly": self.settings.assembly_degree,
                "quad_error": self.settings.error_degree,
                "solver": self.settings.solver_method,
                "failures": list(self.failures),
            },
        )
        report.compute_rates()
        if not report.verify_rates():
            self.logger.error("Rate column does not match the error column")
        return report

    def close(self):
        self.thread_pool.shutdown(wait=True)
