import logging
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from src.engine.dg_calculus import (BoundaryMode, boundary_flux_form, div_zeta_form,
                                    partial_form)
from src.engine.dg_space import DGSpace, as_space
from src.engine.mesh_builder import double_boundary_elements
from src.models.operators import AssemblyPath, FormMatrices
from src.models.problem import (PenaltyPolicy, ProblemSpec, ScalarField, VectorField,
                                evaluate_scalar, evaluate_vector)

logger = logging.getLogger("Assembly")


def _jump_form(space: DGSpace, coefficient: np.ndarray, edges: np.ndarray) -> sp.csr_matrix:
    """<c [v], [w]> over the selected edges; the jump is the own trace on the boundary"""
    mesh = space.mesh
    blocks = space.edge_blocks(coefficient)
    plus = mesh.edge_plus[edges]
    minus = mesh.edge_minus[edges]
    return (space.assemble_blocks(plus, plus, blocks["pp"][edges])
            - space.assemble_blocks(plus, minus, blocks["pm"][edges])
            - space.assemble_blocks(minus, plus, blocks["mp"][edges])
            + space.assemble_blocks(minus, minus, blocks["mm"][edges])).tocsr()


def normal_flux(space: DGSpace, zeta: VectorField) -> np.ndarray:
    """zeta . n_e at edge quadrature points"""
    table = space.edge_table()
    z = evaluate_vector(zeta, table.points[..., 0], table.points[..., 1])
    return np.einsum("eqd,ed->eq", z, space.mesh.normals)


def check_assumption(space: DGSpace, zeta: VectorField, div_zeta: ScalarField,
                     gamma: ScalarField) -> float:
    """Sampled minimum of gamma - div(zeta)/2; warns when it is not positive"""
    table = space.element_table()
    x, y = table.points[..., 0], table.points[..., 1]
    margin = evaluate_scalar(gamma, x, y) - 0.5 * evaluate_scalar(div_zeta, x, y)
    lowest = float(margin.min())
    if lowest <= 0:
        logger.warning(f"gamma - div(zeta)/2 reaches {lowest:.3g} <= 0; coercivity of the "
                       f"convection-reaction form is not guaranteed")
    return lowest


def reaction_form(space: DGSpace, div_zeta: ScalarField, gamma: ScalarField) -> sp.csr_matrix:
    table = space.element_table()
    x, y = table.points[..., 0], table.points[..., 1]
    return space.weighted_mass_matrix(evaluate_scalar(gamma, x, y) - evaluate_scalar(div_zeta, x, y))


def inflow_form(space: DGSpace, zeta: VectorField) -> sp.csr_matrix:
    return boundary_flux_form(space, zeta, inflow_only=True)


def centered_flux_form(space: DGSpace, zeta: VectorField, div_zeta: ScalarField) -> sp.csr_matrix:
    """(div(zeta v), w) on elements minus <zeta.n [v], {w}> on interior edges"""
    mesh = space.mesh
    table = space.element_table()
    x, y = table.points[..., 0], table.points[..., 1]
    z = evaluate_vector(zeta, x, y)
    divergence = evaluate_scalar(div_zeta, x, y)
    transport = np.einsum("tqd,tbd->tqb", z, mesh.grad_basis)
    trial = divergence[..., None] * table.basis[None, :, :] + transport
    blocks = np.einsum("tq,qa,tqb->tab", table.weights, table.basis, trial)
    form = space.block_diagonal(blocks)

    edges = np.flatnonzero(mesh.interior)
    edge = space.edge_blocks(-0.5 * normal_flux(space, zeta))
    plus = mesh.edge_plus[edges]
    minus = mesh.edge_minus[edges]
    # [v]{w} = (v+ - v-)(w+ + w-)/2
    form = (form
            + space.assemble_blocks(plus, plus, edge["pp"][edges])
            - space.assemble_blocks(plus, minus, edge["pm"][edges])
            + space.assemble_blocks(minus, plus, edge["mp"][edges])
            - space.assemble_blocks(minus, minus, edge["mm"][edges]))
    return form.tocsr()


def assemble_convection_reaction(mesh_or_space, zeta: VectorField, div_zeta: ScalarField,
                                 gamma: ScalarField,
                                 path: Union[AssemblyPath, str] = AssemblyPath.CENTERED_FLUX) -> sp.csr_matrix:
    """Matrix of (Div_h(zeta v), w) + ((gamma - div zeta) v, w) + inflow term"""
    space = as_space(mesh_or_space)
    path = AssemblyPath(path)
    if path is AssemblyPath.CALCULUS:
        convection = div_zeta_form(space, zeta, "avg")
    else:
        convection = centered_flux_form(space, zeta, div_zeta)
    return (convection + reaction_form(space, div_zeta, gamma) + inflow_form(space, zeta)).tocsr()


def assemble_upwind_penalty(mesh_or_space, zeta: VectorField) -> sp.csr_matrix:
    """Interior-edge term <|zeta.n|/2 [v], [w]>"""
    space = as_space(mesh_or_space)
    return _jump_form(space, 0.5 * np.abs(normal_flux(space, zeta)), np.flatnonzero(space.mesh.interior))


def jump_penalty_form(space: DGSpace, penalty: PenaltyPolicy) -> sp.csr_matrix:
    mesh = space.mesh
    weights = penalty.values(mesh) / mesh.edge_lengths
    coefficient = np.broadcast_to(weights[:, None], space.edge_table().weights.shape)
    return _jump_form(space, coefficient, np.arange(mesh.num_edges))


def zero_data_gradient_forms(space: DGSpace) -> dict:
    """Right-hand side matrices of the four one-sided zero-data partials"""
    return space.cached("zero-data-gradient-forms", lambda: {
        (side, direction): partial_form(space, direction, side, BoundaryMode.ZERO_DATA)[0]
        for side in ("+", "-") for direction in (0, 1)
    })


def assemble_dwdg_diffusion(mesh_or_space, penalty: PenaltyPolicy) -> sp.csr_matrix:
    """Dual-wind diffusion form averaged over both one-sided gradients"""
    space = as_space(mesh_or_space)
    if not isinstance(penalty, PenaltyPolicy):
        penalty = PenaltyPolicy.constant(penalty)
    if penalty.is_zero:
        doubles = double_boundary_elements(space.mesh)
        if doubles.size:
            logger.warning(f"sigma_e = 0 on a mesh with {doubles.size} elements having two "
                           f"boundary edges; the diffusion form may be singular")
    inverse_mass = space.inverse_mass_matrix()
    form = sp.csr_matrix((space.num_dofs, space.num_dofs))
    for gradient in zero_data_gradient_forms(space).values():
        form = form + 0.5 * (gradient.T @ inverse_mass @ gradient)
    form = form + jump_penalty_form(space, penalty)
    # Symmetrize away round-off from the triple products
    return (0.5 * (form + form.T)).tocsr()


def _boundary_values(space: DGSpace, fn: ScalarField) -> np.ndarray:
    table = space.edge_table()
    values = evaluate_scalar(fn, table.points[..., 0], table.points[..., 1])
    return np.where(space.mesh.boundary[:, None], values, 0.0)


def assemble_rhs_reduced(space: DGSpace, problem: ProblemSpec) -> np.ndarray:
    """(f, v) plus the weak inflow data term"""
    load = space.element_load(space.sample(problem.f))
    flux = normal_flux(space, problem.zeta)
    inflow = np.where(flux < 0, -flux, 0.0)
    return load + space.edge_load(inflow * _boundary_values(space, problem.g))


def assemble_rhs_full(mesh_or_space, problem: ProblemSpec, penalty: Optional[PenaltyPolicy] = None,
                      eps: Optional[float] = None) -> np.ndarray:
    """Reduced right-hand side minus eps <g, avg-grad_0 v . n - sigma_e/h_e v> on the boundary"""
    space = as_space(mesh_or_space)
    penalty = problem.penalty if penalty is None else penalty
    eps = problem.eps if eps is None else eps
    rhs = assemble_rhs_reduced(space, problem)
    if eps == 0.0:
        return rhs

    mesh = space.mesh
    g_values = _boundary_values(space, problem.g)
    inverse_mass = space.inverse_mass_matrix()
    forms = zero_data_gradient_forms(space)
    gradient_term = np.zeros(space.num_dofs)
    for direction in (0, 1):
        averaged = 0.5 * (forms[("+", direction)] + forms[("-", direction)])
        functional = space.edge_load(g_values * mesh.normals[:, direction][:, None])
        gradient_term += (inverse_mass @ averaged).T @ functional

    penalty_weights = (penalty.values(mesh) / mesh.edge_lengths)[:, None]
    penalty_term = space.edge_load(penalty_weights * g_values)
    return rhs - eps * (gradient_term - penalty_term)


def assemble_reduced(mesh_or_space, problem: ProblemSpec,
                     path: Union[AssemblyPath, str] = AssemblyPath.CENTERED_FLUX) -> FormMatrices:
    """Convection-reaction problem with upwind penalty, eps = 0"""
    space = as_space(mesh_or_space)
    check_assumption(space, problem.zeta, problem.div_zeta, problem.gamma)
    a_ar = assemble_convection_reaction(space, problem.zeta, problem.div_zeta, problem.gamma, path)
    upwind = assemble_upwind_penalty(space, problem.zeta)
    return FormMatrices(
        a_ar=a_ar,
        upwind_penalty=upwind,
        diffusion=None,
        total=(a_ar + upwind).tocsr(),
        rhs=assemble_rhs_reduced(space, problem),
        eps=0.0,
        penalty=problem.penalty,
        path=AssemblyPath(path),
    )


def assemble_full(mesh_or_space, problem: ProblemSpec, penalty: Optional[PenaltyPolicy] = None,
                  path: Union[AssemblyPath, str] = AssemblyPath.CENTERED_FLUX) -> FormMatrices:
    """eps A_d + A_ar + A_upw_penalty and the matching right-hand side"""
    space = as_space(mesh_or_space)
    penalty = problem.penalty if penalty is None else penalty
    if problem.eps == 0.0:
        return assemble_reduced(space, problem.with_penalty(penalty), path)
    check_assumption(space, problem.zeta, problem.div_zeta, problem.gamma)
    a_ar = assemble_convection_reaction(space, problem.zeta, problem.div_zeta, problem.gamma, path)
    upwind = assemble_upwind_penalty(space, problem.zeta)
    diffusion = assemble_dwdg_diffusion(space, penalty)
    total = (problem.eps * diffusion + a_ar + upwind).tocsr()
    logger.info(f"Assembled {problem.name}: {space.num_dofs} dofs, {total.nnz} nonzeros, "
                f"eps={problem.eps:g}, sigma={penalty.label()}, path={AssemblyPath(path).value}")
    return FormMatrices(
        a_ar=a_ar,
        upwind_penalty=upwind,
        diffusion=diffusion,
        total=total,
        rhs=assemble_rhs_full(space, problem, penalty),
        eps=problem.eps,
        penalty=penalty,
        path=AssemblyPath(path),
    )


def sharp_form(space: DGSpace, zeta: VectorField) -> sp.csr_matrix:
    """sum_T h_T (zeta.grad v, zeta.grad w)_T"""
    mesh = space.mesh
    table = space.element_table()
    z = evaluate_vector(zeta, table.points[..., 0], table.points[..., 1])
    streamline = np.einsum("tqd,tad->tqa", z, mesh.grad_basis)
    blocks = np.einsum("tq,tqa,tqb->tab", table.weights * mesh.diameters[:, None], streamline, streamline)
    return space.block_diagonal(blocks)


def boundary_half_flux_form(space: DGSpace, zeta: VectorField) -> sp.csr_matrix:
    """1/2 int over the boundary of |zeta.n| v w"""
    return 0.5 * boundary_flux_form(space, zeta, absolute=True)
