import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from config import SolverSettings
from src.engine.assembly import assemble_full
from src.engine.dg_space import DGSpace
from src.engine.linear_solver import solve
from src.engine.mesh_builder import generate_structured_rect, structured_counts, validate_mesh
from src.engine.norms import error_norms
from src.models.dg_function import DGFunction
from src.models.errors import InvalidArgumentError
from src.models.mesh import Mesh, MeshReport
from src.models.operators import FormMatrices
from src.models.problem import PenaltyPolicy, ProblemSpec
from src.models.reports import NormReport, SolveReport

logger = logging.getLogger("Pipeline")


@dataclass
class SolveResult:
    problem: ProblemSpec
    mesh: Mesh
    space: DGSpace
    forms: FormMatrices
    solution: DGFunction
    report: SolveReport
    mesh_report: MeshReport
    penalty: PenaltyPolicy
    h: float
    errors: Optional[NormReport] = None
    local_errors: Optional[NormReport] = None
    assembly_time: float = 0.0


def build_mesh_for(problem: ProblemSpec, h: float, settings: SolverSettings) -> Mesh:
    nx, ny = structured_counts(problem.domain, h)
    return generate_structured_rect(problem.domain, nx, ny, settings.mesh_rule)


def solve_problem(problem: ProblemSpec, h: Optional[float] = None, penalty: Optional[PenaltyPolicy] = None,
                  settings: Optional[SolverSettings] = None, mesh: Optional[Mesh] = None,
                  mask: Optional[np.ndarray] = None, compute_errors: bool = True) -> SolveResult:
    """Mesh, assemble, solve and (when u is known) measure one configuration"""
    settings = settings or SolverSettings()
    penalty = problem.penalty if penalty is None else penalty
    if mesh is None:
        if h is None:
            raise InvalidArgumentError("Either h or a mesh is required")
        mesh = build_mesh_for(problem, h, settings)
    mesh_report = validate_mesh(mesh, sigma_zero=penalty.is_zero,
                                quasi_uniformity_limit=settings.quasi_uniformity_limit)

    space = DGSpace(mesh, settings.assembly_degree)
    start = time.perf_counter()
    forms = assemble_full(space, problem, penalty, settings.path)
    assembly_time = time.perf_counter() - start

    coefficients, report = solve(forms.total, forms.rhs, settings.solver_method,
                                 direct_tolerance=settings.direct_tolerance,
                                 iterative_tolerance=settings.iterative_tolerance,
                                 restart=settings.gmres_restart,
                                 max_iterations=settings.iterative_max_iter)
    result = SolveResult(problem, mesh, space, forms, DGFunction(mesh, coefficients), report, mesh_report,
                         penalty, mesh.reported_h, assembly_time=assembly_time)

    if compute_errors and problem.has_exact:
        result.errors = error_norms(space, problem, coefficients, None, penalty,
                                    settings.error_degree, settings.saturation_threshold)
        if mask is not None:
            result.local_errors = error_norms(space, problem, coefficients, mask, penalty,
                                              settings.error_degree, settings.saturation_threshold)
    logger.info(f"Solved {problem.name} at h={result.h:g}, sigma={penalty.label()}: "
                f"{space.num_dofs} dofs in {assembly_time + report.wall_time:.2f}s")
    return result
