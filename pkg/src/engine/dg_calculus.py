import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from src.engine.dg_space import DGSpace
from src.models.dg_function import DGFunction
from src.models.errors import InvalidArgumentError
from src.models.operators import SparseOperator
from src.models.problem import ScalarField, VectorField, evaluate_scalar, evaluate_vector

logger = logging.getLogger("DGCalculus")


class BoundaryMode(Enum):
    NATURAL = "natural"
    ZERO_DATA = "zero-data"
    DATA = "data"


class TraceSide(Enum):
    PLUS = "plus"
    MINUS = "minus"
    AVERAGE = "average"
    OWN = "own"


_SIDE_WEIGHTS = {
    TraceSide.PLUS: (1.0, 0.0),
    TraceSide.MINUS: (0.0, 1.0),
    TraceSide.AVERAGE: (0.5, 0.5),
    TraceSide.OWN: (1.0, 0.0),
}


def _side_sign(side: str) -> int:
    if side in ("+", "plus", 1):
        return 1
    if side in ("-", "minus", -1):
        return -1
    raise InvalidArgumentError(f"Side must be '+' or '-', got {side!r}")


@dataclass(frozen=True, eq=False)
class TraceSelector:
    """Which trace Q_i^+ and Q_i^- pick on every edge for direction i"""
    direction: int
    signs: np.ndarray
    right: np.ndarray  # TraceSide per edge for Q_i^+
    left: np.ndarray   # TraceSide per edge for Q_i^-

    def tags(self, side: str) -> np.ndarray:
        return self.right if _side_sign(side) > 0 else self.left

    def weights(self, side: str) -> Tuple[np.ndarray, np.ndarray]:
        """Per-edge coefficients (alpha, beta) with Q(v) = alpha v+ + beta v-"""
        tags = self.tags(side)
        alpha = np.array([_SIDE_WEIGHTS[t][0] for t in tags])
        beta = np.array([_SIDE_WEIGHTS[t][1] for t in tags])
        return alpha, beta


def build_trace_selector(space: DGSpace, direction: int, sign_tolerance: float = 1e-12) -> TraceSelector:
    if direction not in (0, 1):
        raise InvalidArgumentError(f"Direction must be 0 or 1, got {direction}")
    mesh = space.mesh
    component = mesh.normals[:, direction]
    magnitude = np.linalg.norm(mesh.normals, axis=1)
    signs = np.where(np.abs(component) < sign_tolerance * magnitude, 0, np.sign(component)).astype(int)

    right = np.empty(mesh.num_edges, dtype=object)
    left = np.empty(mesh.num_edges, dtype=object)
    right[signs > 0], left[signs > 0] = TraceSide.PLUS, TraceSide.MINUS
    right[signs < 0], left[signs < 0] = TraceSide.MINUS, TraceSide.PLUS
    right[signs == 0], left[signs == 0] = TraceSide.AVERAGE, TraceSide.AVERAGE
    right[mesh.boundary], left[mesh.boundary] = TraceSide.OWN, TraceSide.OWN
    return TraceSelector(direction, signs, right, left)


def _edge_form(space: DGSpace, coefficient: np.ndarray, alpha: np.ndarray, beta: np.ndarray,
               edges: np.ndarray) -> sp.csr_matrix:
    """Form of <c Q(v), [phi]> over the selected edges, Q(v) = alpha v+ + beta v-"""
    mesh = space.mesh
    blocks = space.edge_blocks(coefficient)
    a = alpha[edges, None, None]
    b = beta[edges, None, None]
    plus = mesh.edge_plus[edges]
    minus = mesh.edge_minus[edges]
    return (space.assemble_blocks(plus, plus, a * blocks["pp"][edges])
            + space.assemble_blocks(plus, minus, b * blocks["pm"][edges])
            - space.assemble_blocks(minus, plus, a * blocks["mp"][edges])
            - space.assemble_blocks(minus, minus, b * blocks["mm"][edges])).tocsr()


def partial_form(space: DGSpace, direction: int, side: str,
                 boundary: Union[BoundaryMode, str] = BoundaryMode.NATURAL,
                 g: Optional[ScalarField] = None,
                 sign_tolerance: float = 1e-12) -> Tuple[sp.csr_matrix, Optional[np.ndarray]]:
    """Right-hand side matrix B and boundary load l with M (d v) = B v + l"""
    mode = BoundaryMode(boundary)
    mesh = space.mesh
    selector = build_trace_selector(space, direction, sign_tolerance)
    alpha, beta = selector.weights(side)

    grad = mesh.grad_basis[:, :, direction]
    element_blocks = -(grad * (mesh.areas / 3.0)[:, None])[:, :, None] * np.ones((1, 1, 3))
    form = space.block_diagonal(element_blocks)

    edges = np.arange(mesh.num_edges) if mode is BoundaryMode.NATURAL else np.flatnonzero(mesh.interior)
    table = space.edge_table()
    normal = np.broadcast_to(mesh.normals[:, direction][:, None], table.weights.shape)
    form = (form + _edge_form(space, normal, alpha, beta, edges)).tocsr()

    load = None
    if mode is BoundaryMode.DATA:
        if g is None:
            raise InvalidArgumentError("Boundary data g is required in data mode")
        values = evaluate_scalar(g, table.points[..., 0], table.points[..., 1]) * normal
        values = np.where(mesh.boundary[:, None], values, 0.0)
        load = space.edge_load(values)
    return form, load


def build_partial(space: DGSpace, direction: int, side: str,
                  boundary: Union[BoundaryMode, str] = BoundaryMode.NATURAL,
                  g: Optional[ScalarField] = None, sign_tolerance: float = 1e-12) -> SparseOperator:
    """One-sided discrete partial derivative in the given direction"""
    form, load = partial_form(space, direction, side, boundary, g, sign_tolerance)
    inverse_mass = space.inverse_mass_matrix()
    name = f"d{'+' if _side_sign(side) > 0 else '-'}/dx{direction + 1}"
    return SparseOperator(inverse_mass @ form, None if load is None else inverse_mass @ load, name)


def build_avg_gradient(space: DGSpace, boundary: Union[BoundaryMode, str] = BoundaryMode.NATURAL,
                       g: Optional[ScalarField] = None,
                       sign_tolerance: float = 1e-12) -> Tuple[SparseOperator, SparseOperator]:
    components = []
    for direction in (0, 1):
        right = build_partial(space, direction, "+", boundary, g, sign_tolerance)
        left = build_partial(space, direction, "-", boundary, g, sign_tolerance)
        components.append((right + left).scaled(0.5))
    return components[0], components[1]


def div_zeta_form(space: DGSpace, zeta: VectorField, side: str = "avg",
                  sign_tolerance: float = 1e-12) -> sp.csr_matrix:
    """B with M Div_h(zeta v) = B v, natural boundary traces"""
    mesh = space.mesh
    element = space.element_table()
    z = evaluate_vector(zeta, element.points[..., 0], element.points[..., 1])  # (nt, nq, 2)
    # -(zeta v, grad phi): test a, trial b
    z_dot_grad = np.einsum("tqd,tad->tqa", z, mesh.grad_basis)
    blocks = -np.einsum("tq,tqa,qb->tab", element.weights, z_dot_grad, element.basis)
    form = space.block_diagonal(blocks)

    edges = np.arange(mesh.num_edges)
    table = space.edge_table()
    ze = evaluate_vector(zeta, table.points[..., 0], table.points[..., 1])
    for direction in (0, 1):
        selector = build_trace_selector(space, direction, sign_tolerance)
        if side == "avg":
            a_right, b_right = selector.weights("+")
            a_left, b_left = selector.weights("-")
            alpha, beta = 0.5 * (a_right + a_left), 0.5 * (b_right + b_left)
        else:
            alpha, beta = selector.weights(side)
        coefficient = ze[..., direction] * mesh.normals[:, direction][:, None]
        form = form + _edge_form(space, coefficient, alpha, beta, edges)
    return form.tocsr()


def build_div_zeta(space: DGSpace, zeta: VectorField, side: str = "avg",
                   sign_tolerance: float = 1e-12) -> SparseOperator:
    """v -> Div_h^side(zeta v); side is '+', '-' or 'avg'"""
    if side not in ("+", "-", "avg"):
        raise InvalidArgumentError(f"Divergence side must be '+', '-' or 'avg', got {side!r}")
    form = div_zeta_form(space, zeta, side, sign_tolerance)
    return SparseOperator(space.inverse_mass_matrix() @ form, None, f"Div{side}(zeta .)")


def _coefficients(v) -> np.ndarray:
    if isinstance(v, DGFunction):
        return v.coefficients
    return np.asarray(v, dtype=float)


def _relative(residual: float, terms) -> float:
    scale = sum(abs(t) for t in terms)
    if scale == 0.0:
        return abs(residual)
    return abs(residual) / scale


def boundary_flux_form(space: DGSpace, zeta: VectorField, absolute: bool = False,
                       inflow_only: bool = False) -> sp.csr_matrix:
    """<c v, w> over boundary edges with c = zeta.n, |zeta.n| or the inflow part"""
    mesh = space.mesh
    table = space.edge_table()
    ze = evaluate_vector(zeta, table.points[..., 0], table.points[..., 1])
    flux = np.einsum("eqd,ed->eq", ze, mesh.normals)
    if inflow_only:
        flux = np.where(flux < 0, -flux, 0.0)
    elif absolute:
        flux = np.abs(flux)
    edges = np.flatnonzero(mesh.boundary)
    blocks = space.edge_blocks(flux)["pp"][edges]
    plus = mesh.edge_plus[edges]
    return space.assemble_blocks(plus, plus, blocks)


def check_ibp_identity(space: DGSpace, zeta: VectorField, div_zeta: ScalarField, v, phi,
                       side: str = "+") -> float:
    """Relative defect of the generalized integration by parts formula"""
    v = _coefficients(v)
    phi = _coefficients(phi)
    other = "-" if side == "+" else "+"
    mass = space.mass_matrix()
    first = float(phi @ (mass @ build_div_zeta(space, zeta, side).apply(v)))
    second = float(v @ (mass @ build_div_zeta(space, zeta, other).apply(phi)))
    divergence = space.sample(div_zeta)
    reaction = float(phi @ (space.weighted_mass_matrix(divergence) @ v))
    boundary = float(phi @ (boundary_flux_form(space, zeta) @ v))
    return _relative(first + second - reaction - boundary, (first, second, reaction, boundary))


def check_centered_flux_equiv(space: DGSpace, zeta: VectorField, div_zeta: ScalarField, v, phi) -> float:
    """Relative defect between the averaged divergence and centered fluxes"""
    v = _coefficients(v)
    phi = _coefficients(phi)
    mesh = space.mesh
    averaged = float(phi @ (space.mass_matrix() @ build_div_zeta(space, zeta, "avg").apply(v)))

    element = space.element_table()
    z = evaluate_vector(zeta, element.points[..., 0], element.points[..., 1])
    divergence = evaluate_scalar(div_zeta, element.points[..., 0], element.points[..., 1])
    v_values = space.element_values(v)
    grad_v = space.element_gradients(v)
    phi_values = space.element_values(phi)
    integrand = (divergence * v_values + np.einsum("tqd,td->tq", z, grad_v)) * phi_values
    broken = float(np.sum(element.weights * integrand))

    table = space.edge_table()
    ze = evaluate_vector(zeta, table.points[..., 0], table.points[..., 1])
    flux = np.einsum("eqd,ed->eq", ze, mesh.normals)
    v_plus, v_minus = space.edge_traces(v)
    phi_plus, phi_minus = space.edge_traces(phi)
    interior = mesh.interior[:, None]
    jump_term = float(np.sum(np.where(interior, table.weights * flux * (v_plus - v_minus)
                                      * 0.5 * (phi_plus + phi_minus), 0.0)))
    return _relative(averaged - broken + jump_term, (averaged, broken, jump_term))


def ibp_residuals(space: DGSpace, zeta: VectorField, div_zeta: ScalarField, v, phi) -> Tuple[float, float]:
    """Integration by parts defects for both orderings of the one-sided divergences"""
    return (check_ibp_identity(space, zeta, div_zeta, v, phi, "+"),
            check_ibp_identity(space, zeta, div_zeta, v, phi, "-"))
