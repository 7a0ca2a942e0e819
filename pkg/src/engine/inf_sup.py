import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from src.engine.assembly import (assemble_dwdg_diffusion, assemble_full, assemble_upwind_penalty,
                                 boundary_half_flux_form, sharp_form)
from src.engine.dg_space import DGSpace, as_space
from src.models.errors import InvalidArgumentError, NumericError
from src.models.operators import AssemblyPath
from src.models.problem import PenaltyPolicy, ProblemSpec, evaluate_vector

logger = logging.getLogger("InfSup")


@dataclass
class InfSupEstimate:
    value: float
    probe_ratio: float
    dofs: int
    worst_trial: np.ndarray


def sharp_gram_matrix(mesh_or_space, problem: ProblemSpec,
                      penalty: Optional[PenaltyPolicy] = None) -> sp.csr_matrix:
    """Gram matrix of the h-sharp norm"""
    space = as_space(mesh_or_space)
    penalty = problem.penalty if penalty is None else penalty
    gram = (space.mass_matrix()
            + boundary_half_flux_form(space, problem.zeta)
            + assemble_upwind_penalty(space, problem.zeta)
            + sharp_form(space, problem.zeta))
    if problem.eps > 0:
        gram = gram + problem.eps * assemble_dwdg_diffusion(space, penalty)
    return sp.csr_matrix(0.5 * (gram + gram.T))


def _cholesky(gram: np.ndarray) -> np.ndarray:
    try:
        return la.cholesky(gram, lower=True)
    except la.LinAlgError as exc:
        raise NumericError(f"Norm Gram matrix is not positive definite: {exc}")


def best_test_function(matrix, gram, v: np.ndarray) -> Tuple[np.ndarray, float]:
    """Maximizer of a(v, w) / ||w|| and the ratio a(v, w*) / (||v|| ||w*||)"""
    dense_a = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
    dense_n = gram.toarray() if sp.issparse(gram) else np.asarray(gram)
    action = dense_a @ v
    w = la.cho_solve((_cholesky(dense_n), True), action)
    v_norm = np.sqrt(v @ dense_n @ v)
    return w, float(np.sqrt(max(action @ w, 0.0)) / v_norm)


def pairing_ratio(matrix, gram, v: np.ndarray, w: np.ndarray) -> float:
    """a(v, w) / (||v|| ||w||) in the norm of the Gram matrix"""
    v_norm = np.sqrt(v @ (gram @ v))
    w_norm = np.sqrt(w @ (gram @ w))
    return float((w @ (matrix @ v)) / (v_norm * w_norm))


def probe_test_function(space: DGSpace, problem: ProblemSpec, v: np.ndarray) -> np.ndarray:
    """Piecewise constant w with w|_T = h_T <zeta>_T . grad v"""
    mesh = space.mesh
    table = space.element_table()
    z = evaluate_vector(problem.zeta, table.points[..., 0], table.points[..., 1])
    mean_zeta = np.einsum("tq,tqd->td", table.weights, z) / mesh.areas[:, None]
    values = mesh.diameters * np.einsum("td,td->t", mean_zeta, space.element_gradients(v))
    return np.repeat(values, 3)


def estimate_infsup(mesh_or_space, problem: ProblemSpec, penalty: Optional[PenaltyPolicy] = None,
                    path: AssemblyPath = AssemblyPath.CENTERED_FLUX,
                    max_dofs: int = 2048) -> InfSupEstimate:
    """Smallest singular value of L^-1 A L^-T where N = L L^T is the h-sharp Gram matrix"""
    space = as_space(mesh_or_space)
    if space.num_dofs > max_dofs:
        raise InvalidArgumentError(
            f"Dense inf-sup estimate limited to {max_dofs} dofs, mesh has {space.num_dofs}")
    penalty = problem.penalty if penalty is None else penalty
    forms = assemble_full(space, problem, penalty, path)
    dense_a = forms.total.toarray()
    gram = sharp_gram_matrix(space, problem, penalty)
    factor = _cholesky(gram.toarray())

    scaled = la.solve_triangular(factor, dense_a, lower=True)
    scaled = la.solve_triangular(factor, scaled.T, lower=True).T
    _, singular, right = la.svd(scaled)
    value = float(singular[-1])
    worst = la.solve_triangular(factor.T, right[-1], lower=False)

    probe = probe_test_function(space, problem, worst)
    probe_ratio = pairing_ratio(forms.total, gram, worst, probe) if np.any(probe) else 0.0
    logger.info(f"Inf-sup estimate for {problem.name} with {space.num_dofs} dofs: {value:.4f} "
                f"(probe ratio {probe_ratio:.4f})")
    return InfSupEstimate(value, probe_ratio, space.num_dofs, worst)
