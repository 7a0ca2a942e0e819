import logging
from typing import Dict, Optional, Tuple, Union

import numpy as np

from src.engine.assembly import zero_data_gradient_forms
from src.engine.dg_calculus import BoundaryMode
from src.engine.dg_space import DGSpace
from src.engine.quadrature import lower_degree
from src.models.dg_function import DGFunction
from src.models.errors import CapabilityError, InvalidArgumentError
from src.models.problem import (PenaltyPolicy, ProblemSpec, ScalarField, VectorField,
                                evaluate_scalar, evaluate_vector)
from src.models.reports import NormReport

logger = logging.getLogger("Norms")


class DiscreteField:
    """A DG function seen through quadrature"""

    def __init__(self, space: DGSpace, coefficients):
        self.space = space
        if isinstance(coefficients, DGFunction):
            coefficients = coefficients.coefficients
        self.coefficients = np.asarray(coefficients, dtype=float)

    def element_values(self, degree: int) -> np.ndarray:
        return self.space.element_values(self.coefficients, degree)

    def element_gradients(self, degree: int) -> np.ndarray:
        nq = self.space.element_table(degree).weights.shape[1]
        grad = self.space.element_gradients(self.coefficients)
        return np.repeat(grad[:, None, :], nq, axis=1)

    def edge_traces(self, degree: int) -> Tuple[np.ndarray, np.ndarray]:
        return self.space.edge_traces(self.coefficients, degree)

    def one_sided_gradients(self, degree: int) -> Dict[str, np.ndarray]:
        """Zero-data one-sided gradients as (ndofs, 2) coefficient arrays"""
        forms = zero_data_gradient_forms(self.space)
        inverse_mass = self.space.inverse_mass_matrix()
        return {
            side: np.column_stack([inverse_mass @ (forms[(side, d)] @ self.coefficients) for d in (0, 1)])
            for side in ("+", "-")
        }


class ExactField:
    """A smooth function given by callables; its traces agree on both sides of every edge"""

    def __init__(self, space: DGSpace, u: ScalarField, gradient: Optional[VectorField] = None):
        self.space = space
        self.u = u
        self.gradient = gradient

    def element_values(self, degree: int) -> np.ndarray:
        table = self.space.element_table(degree)
        return evaluate_scalar(self.u, table.points[..., 0], table.points[..., 1])

    def element_gradients(self, degree: int) -> np.ndarray:
        if self.gradient is None:
            raise CapabilityError("exact gradient (required by the sharp norms)")
        table = self.space.element_table(degree)
        return evaluate_vector(self.gradient, table.points[..., 0], table.points[..., 1])

    def edge_traces(self, degree: int) -> Tuple[np.ndarray, np.ndarray]:
        table = self.space.edge_table(degree)
        values = evaluate_scalar(self.u, table.points[..., 0], table.points[..., 1])
        return values, np.where(self.space.mesh.interior[:, None], values, 0.0)

    def one_sided_gradients(self, degree: int) -> Dict[str, np.ndarray]:
        gx, gy = discrete_gradient_of_exact(self.space, self.u, BoundaryMode.ZERO_DATA, degree=degree)
        both = np.column_stack([gx.coefficients, gy.coefficients])
        return {"+": both, "-": both}


class ErrorField:
    """u - u_h evaluated pointwise"""

    def __init__(self, exact: ExactField, discrete: DiscreteField):
        self.exact = exact
        self.discrete = discrete
        self.space = discrete.space

    def element_values(self, degree: int) -> np.ndarray:
        return self.exact.element_values(degree) - self.discrete.element_values(degree)

    def element_gradients(self, degree: int) -> np.ndarray:
        return self.exact.element_gradients(degree) - self.discrete.element_gradients(degree)

    def edge_traces(self, degree: int) -> Tuple[np.ndarray, np.ndarray]:
        up, um = self.exact.edge_traces(degree)
        vp, vm = self.discrete.edge_traces(degree)
        return up - vp, um - vm

    def one_sided_gradients(self, degree: int) -> Dict[str, np.ndarray]:
        exact = self.exact.one_sided_gradients(degree)
        discrete = self.discrete.one_sided_gradients(degree)
        return {side: exact[side] - discrete[side] for side in ("+", "-")}


Field = Union[DiscreteField, ExactField, ErrorField]


def discrete_gradient_of_exact(space: DGSpace, u: ScalarField,
                               boundary: Union[BoundaryMode, str] = BoundaryMode.NATURAL,
                               g: Optional[ScalarField] = None,
                               degree: Optional[int] = None) -> Tuple[DGFunction, DGFunction]:
    """Discrete gradient of a continuous function from quadrature of its traces.

    Interior edges see a single-valued trace, so every trace selector gives the
    same value there. Natural mode uses u itself as boundary data.
    """
    mode = BoundaryMode(boundary)
    if mode is BoundaryMode.DATA and g is None:
        raise InvalidArgumentError("Boundary data g is required in data mode")
    mesh = space.mesh
    element = space.element_table(degree)
    values = evaluate_scalar(u, element.points[..., 0], element.points[..., 1])
    mean = np.einsum("tq,tq->t", element.weights, values)

    edge = space.edge_table(degree)
    traces = evaluate_scalar(u, edge.points[..., 0], edge.points[..., 1])
    if mode is BoundaryMode.NATURAL:
        boundary_values = traces
    elif mode is BoundaryMode.DATA:
        boundary_values = evaluate_scalar(g, edge.points[..., 0], edge.points[..., 1])
    else:
        boundary_values = np.zeros_like(traces)
    on_edges = np.where(mesh.boundary[:, None], boundary_values, traces)

    inverse_mass = space.inverse_mass_matrix()
    components = []
    for direction in (0, 1):
        load = -(mesh.grad_basis[:, :, direction] * mean[:, None]).ravel()
        weighted = on_edges * mesh.normals[:, direction][:, None]
        load = load + space.edge_load(weighted, degree, "plus")
        load = load - space.edge_load(weighted, degree, "minus")
        components.append(DGFunction(mesh, inverse_mass @ load))
    return components[0], components[1]


def _edge_masks(space: DGSpace, mask: Optional[np.ndarray]):
    mesh = space.mesh
    if mask is None:
        mask = np.ones(mesh.num_triangles, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (mesh.num_triangles,):
        raise InvalidArgumentError(f"Element mask needs shape ({mesh.num_triangles},), got {mask.shape}")
    plus_in = mask[mesh.edge_plus]
    minus_in = np.where(mesh.interior, mask[np.maximum(mesh.edge_minus, 0)], False)
    interior = mesh.interior & plus_in & minus_in
    boundary = mesh.boundary & plus_in
    return mask, plus_in, minus_in, interior, boundary


def norm_components(field: Field, problem: ProblemSpec, mask: Optional[np.ndarray] = None,
                    penalty: Optional[PenaltyPolicy] = None, degree: int = 8) -> Dict[str, float]:
    """Squared building blocks shared by the whole norm family"""
    space = field.space
    mesh = space.mesh
    penalty = problem.penalty if penalty is None else penalty
    mask, plus_in, minus_in, interior, boundary = _edge_masks(space, mask)

    element = space.element_table(degree)
    values = field.element_values(degree)
    per_element = np.einsum("tq,tq->t", element.weights, values ** 2)
    l2 = float(per_element[mask].sum())
    inverse = float((per_element / mesh.diameters)[mask].sum())

    z = evaluate_vector(problem.zeta, element.points[..., 0], element.points[..., 1])
    streamline = np.einsum("tqd,tqd->tq", z, field.element_gradients(degree))
    sharp = float((mesh.diameters * np.einsum("tq,tq->t", element.weights, streamline ** 2))[mask].sum())

    edge = space.edge_table(degree)
    ze = evaluate_vector(problem.zeta, edge.points[..., 0], edge.points[..., 1])
    flux = np.abs(np.einsum("eqd,ed->eq", ze, mesh.normals))
    plus, minus = field.edge_traces(degree)
    jump = np.where(mesh.boundary[:, None], plus, plus - minus)

    def edge_sum(integrand: np.ndarray, selected: np.ndarray) -> float:
        return float(np.einsum("eq,eq->e", edge.weights, integrand)[selected].sum())

    boundary_flux = 0.5 * edge_sum(flux * plus ** 2, boundary)
    upwind_jumps = 0.5 * edge_sum(flux * jump ** 2, interior)
    element_boundaries = edge_sum(plus ** 2, plus_in) + edge_sum(minus ** 2, minus_in)
    sigma = (penalty.values(mesh) / mesh.edge_lengths)[:, None]
    jump_penalty = edge_sum(sigma * jump ** 2, interior | boundary)

    gradients = field.one_sided_gradients(degree)
    masses = [space.element_mass_norms(gradients[side][:, d]) for side in ("+", "-") for d in (0, 1)]
    one_sided = 0.5 * float(sum(m[mask].sum() for m in masses))

    return {
        "l2": l2,
        "boundary_flux": boundary_flux,
        "upwind_jumps": upwind_jumps,
        "element_boundaries": element_boundaries,
        "sharp": sharp,
        "inverse": inverse,
        "one_sided_gradients": one_sided,
        "jump_penalty": jump_penalty,
    }


def norms_from_components(parts: Dict[str, float], eps: float) -> NormReport:
    ar = parts["l2"] + parts["boundary_flux"]
    upw = ar + parts["upwind_jumps"]
    d = parts["one_sided_gradients"] + parts["jump_penalty"]
    h = eps * d + upw
    h_sharp = h + parts["sharp"]
    return NormReport(
        l2=np.sqrt(parts["l2"]),
        ar=np.sqrt(ar),
        upw=np.sqrt(upw),
        upw_star=np.sqrt(upw + parts["element_boundaries"]),
        upw_sharp=np.sqrt(upw + parts["sharp"]),
        d=np.sqrt(d),
        h=np.sqrt(h),
        h_star=np.sqrt(eps * d + upw + parts["element_boundaries"]),
        h_sharp=np.sqrt(h_sharp),
        h_sharp_star=np.sqrt(h_sharp + parts["inverse"] + parts["element_boundaries"]),
    )


def norm_suite(field: Field, problem: ProblemSpec, mask: Optional[np.ndarray] = None,
               penalty: Optional[PenaltyPolicy] = None, degree: int = 8) -> NormReport:
    """Every mesh-dependent norm of a discrete, exact or error field"""
    parts = norm_components(field, problem, mask, penalty, degree)
    return norms_from_components(parts, problem.eps)


def error_norms(space: DGSpace, problem: ProblemSpec, solution, mask: Optional[np.ndarray] = None,
                penalty: Optional[PenaltyPolicy] = None, degree: int = 8,
                saturation_threshold: float = 0.05) -> NormReport:
    """Norms of u - u_h, flagged when a lower quadrature degree disagrees"""
    if problem.exact is None:
        raise CapabilityError(f"exact solution for problem {problem.name}")
    error = ErrorField(ExactField(space, problem.exact, problem.exact_gradient), DiscreteField(space, solution))
    report = norm_suite(error, problem, mask, penalty, degree)
    check = norm_suite(error, problem, mask, penalty, lower_degree(degree))
    for name in ("l2", "h"):
        reference = report[name]
        if reference > 0 and abs(reference - check[name]) > saturation_threshold * reference:
            report.quadrature_saturated = True
    if report.quadrature_saturated:
        logger.warning(f"Quadrature saturation for {problem.name} at {space.num_dofs} dofs: "
                       f"L2 {report.l2:.3e} vs {check.l2:.3e}, h {report.h:.3e} vs {check.h:.3e}")
    return report
