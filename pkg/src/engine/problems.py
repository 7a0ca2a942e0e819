import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from src.models.errors import InvalidArgumentError
from src.models.mesh import Rectangle
from src.models.problem import (PenaltyPolicy, ProblemSpec, ScalarField, VectorField,
                                constant_scalar, constant_vector, manufactured_source)

logger = logging.getLogger("Problems")

UNIT_SQUARE = Rectangle(0.0, 0.0, 1.0, 1.0)
EXPONENT_FLOOR = -700.0


def safe_exp(exponent) -> np.ndarray:
    """exp with exponents at or below -700 mapped to exactly zero"""
    exponent = np.asarray(exponent, dtype=float)
    clipped = np.where(exponent <= EXPONENT_FLOOR, 0.0, exponent)
    return np.where(exponent <= EXPONENT_FLOOR, 0.0, np.exp(np.minimum(clipped, 700.0)))


def manufactured(name: str, u: ScalarField, gradient: VectorField, laplacian: ScalarField,
                 zeta: VectorField, div_zeta: ScalarField, gamma: ScalarField, eps: float,
                 domain: Rectangle, penalty: Optional[PenaltyPolicy] = None,
                 gamma0: Optional[float] = None, source: Optional[ScalarField] = None,
                 rebuild: Optional[Callable[[float], ProblemSpec]] = None) -> ProblemSpec:
    """Problem whose source and boundary data come from a prescribed exact solution

    A closed-form source may be passed in place of the generic one; it is
    checked against the exact solution like the generic one is.
    """
    problem = ProblemSpec(
        name=name,
        domain=domain,
        eps=eps,
        zeta=zeta,
        div_zeta=div_zeta,
        gamma=gamma,
        f=source or manufactured_source(eps, zeta, gamma, u, gradient, laplacian),
        g=u,
        exact=u,
        exact_gradient=gradient,
        exact_laplacian=laplacian,
        gamma0=gamma0,
        penalty=penalty or PenaltyPolicy.constant(5.0),
        manufactured=True,
        rebuild=rebuild,
    )
    x, y = problem.sample_grid(5)
    problem.verify_manufactured(x, y)
    return problem


def example_smooth(eps: float = 1e-9) -> ProblemSpec:
    """u = x2/x1 on [1,3]x[0,2] transported by zeta = (x1, x2)"""
    # zeta.grad u vanishes identically, so only the diffusion term feeds f
    return manufactured("smooth", lambda x, y: y / x,
                        lambda x, y: (-y / x ** 2, 1.0 / x),
                        lambda x, y: 2.0 * y / x ** 3,
                        zeta=lambda x, y: (x, y), div_zeta=constant_scalar(2.0),
                        gamma=constant_scalar(0.0), eps=eps, domain=Rectangle(1.0, 0.0, 3.0, 2.0),
                        source=lambda x, y: -2.0 * eps * y / x ** 3, rebuild=example_smooth)


def _layer_terms(x, y, eps: float):
    """e^a / (1 - e^(-1/eps)) with a = (x1-1)(1-x2)/eps, and the constant numerator term"""
    denominator = 1.0 - safe_exp(-1.0 / eps)
    layer = safe_exp((x - 1.0) * (1.0 - y) / eps) / denominator
    offset = safe_exp(-1.0 / eps) / denominator
    return layer, offset


def example_boundary_layer(eps: float = 1e-9) -> ProblemSpec:
    """Exponential outflow layers along x1 = 1 and x2 = 1, zeta = (1, 1)"""

    def u(x, y):
        layer, offset = _layer_terms(x, y, eps)
        return x + y * (1.0 - x) + offset - layer

    def gradient(x, y):
        layer, _ = _layer_terms(x, y, eps)
        return (1.0 - y) - (1.0 - y) / eps * layer, (1.0 - x) - (1.0 - x) / eps * layer

    def laplacian(x, y):
        layer, _ = _layer_terms(x, y, eps)
        return -((1.0 - y) ** 2 + (1.0 - x) ** 2) / eps ** 2 * layer

    def source(x, y):
        layer, _ = _layer_terms(x, y, eps)
        smooth = (1.0 - y) + (1.0 - x)
        curved = ((1.0 - y) ** 2 + (1.0 - x) ** 2 - (1.0 - y) - (1.0 - x)) / eps * layer
        return smooth + curved

    return manufactured("boundary-layer", u, gradient, laplacian,
                        zeta=constant_vector(1.0, 1.0), div_zeta=constant_scalar(0.0),
                        gamma=constant_scalar(0.0), eps=eps, domain=UNIT_SQUARE,
                        source=source, rebuild=example_boundary_layer)


def interior_layer_data(x, y) -> np.ndarray:
    """1 on the bottom side and on the left side up to x2 = 1/5, else 0"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tol = 1e-12
    bottom = np.abs(y) <= tol
    left = (np.abs(x) <= tol) & (y <= 0.2 + tol)
    return np.where(bottom | left, 1.0, 0.0)


def example_interior_layer_discontinuous(eps: float = 1e-9) -> ProblemSpec:
    """Discontinuous inflow data carried along zeta = (1/2, sqrt(3)/2); no exact solution"""
    return ProblemSpec(
        name="interior-discont",
        domain=UNIT_SQUARE,
        eps=eps,
        zeta=constant_vector(0.5, np.sqrt(3.0) / 2.0),
        div_zeta=constant_scalar(0.0),
        gamma=constant_scalar(0.0),
        f=constant_scalar(0.0),
        g=interior_layer_data,
        rebuild=example_interior_layer_discontinuous,
    )


def example_interior_layer_arctan(eps: float = 1e-9) -> ProblemSpec:
    """u = (1-x1)^3 arctan((x2-0.5)/eps) with zeta = (1, 0)"""

    def u(x, y):
        return (1.0 - x) ** 3 * np.arctan((y - 0.5) / eps)

    def gradient(x, y):
        d = y - 0.5
        return (-3.0 * (1.0 - x) ** 2 * np.arctan(d / eps),
                (1.0 - x) ** 3 * eps / (eps ** 2 + d ** 2))

    def laplacian(x, y):
        d = y - 0.5
        return (6.0 * (1.0 - x) * np.arctan(d / eps)
                - 2.0 * (1.0 - x) ** 3 * d * eps / (eps ** 2 + d ** 2) ** 2)

    return manufactured("interior-arctan", u, gradient, laplacian,
                        zeta=constant_vector(1.0, 0.0), div_zeta=constant_scalar(0.0),
                        gamma=constant_scalar(0.0), eps=eps, domain=UNIT_SQUARE,
                        rebuild=example_interior_layer_arctan)


@dataclass(frozen=True)
class ExamplePreset:
    """Named run configuration of a catalog example"""
    factory: Callable[..., ProblemSpec]
    eps_presets: Tuple[float, ...]
    levels: Tuple[float, ...]
    sigmas: Tuple[float, ...] = (0.0, 5.0)
    local_mask: Optional[Rectangle] = None
    profile: Optional[str] = None
    figure_h: float = 1.0 / 128.0
    description: str = ""

    def build(self, eps: Optional[float] = None) -> ProblemSpec:
        return self.factory(self.eps_presets[0] if eps is None else eps)


_TABLE_LEVELS = (1 / 4, 1 / 8, 1 / 16, 1 / 32, 1 / 64)

CATALOG: Dict[str, ExamplePreset] = {
    "smooth": ExamplePreset(example_smooth, (1e-9,), _TABLE_LEVELS,
                            description="smooth rational solution on [1,3]x[0,2]"),
    "boundary-layer": ExamplePreset(example_boundary_layer, (1e-9,), _TABLE_LEVELS[1:],
                                    local_mask=Rectangle(0.0, 0.0, 0.875, 0.875),
                                    description="exponential outflow layers"),
    "interior-discont": ExamplePreset(example_interior_layer_discontinuous, (1e-9, 1e-3), (1 / 32,),
                                      profile="x1=0",
                                      description="interior layer from discontinuous inflow data"),
    "interior-arctan": ExamplePreset(example_interior_layer_arctan, (1e-9, 1e-3, 1.0), _TABLE_LEVELS,
                                     local_mask=Rectangle(0.0, 0.625, 1.0, 1.0),
                                     description="arctan interior layer along x2 = 0.5"),
}


def catalog() -> Dict[str, ExamplePreset]:
    return dict(CATALOG)


def example_names() -> List[str]:
    return list(CATALOG)


def get_example(name: str, eps: Optional[float] = None) -> ProblemSpec:
    if name not in CATALOG:
        raise InvalidArgumentError(f"Unknown example '{name}'; choose from {', '.join(CATALOG)}")
    return CATALOG[name].build(eps)


def check_derivatives(problem: ProblemSpec, step: float = 1e-6, tol: float = 1e-4,
                      samples: int = 5) -> float:
    """Central differences against the supplied gradient and Laplacian; returns the worst relative gap"""
    if problem.exact is None or problem.exact_gradient is None or problem.exact_laplacian is None:
        raise InvalidArgumentError(f"Problem {problem.name} has no exact solution with derivatives")
    dom = problem.domain
    margin = 2 * step
    xs = np.linspace(dom.x0 + margin, dom.x1 - margin, samples)
    ys = np.linspace(dom.y0 + margin, dom.y1 - margin, samples)
    x, y = np.meshgrid(xs, ys, indexing="ij")
    u = problem.exact
    center = np.asarray(u(x, y), dtype=float)
    right, left = np.asarray(u(x + step, y), dtype=float), np.asarray(u(x - step, y), dtype=float)
    up, down = np.asarray(u(x, y + step), dtype=float), np.asarray(u(x, y - step), dtype=float)
    fd_gradient = ((right - left) / (2 * step), (up - down) / (2 * step))
    # Second differences lose digits with a tiny step; use a coarser one
    wide = 1e-4
    fd_laplacian = ((np.asarray(u(x + wide, y)) + np.asarray(u(x - wide, y))
                     + np.asarray(u(x, y + wide)) + np.asarray(u(x, y - wide)) - 4 * center) / wide ** 2)

    gx, gy = problem.exact_gradient(x, y)
    lap = problem.exact_laplacian(x, y)
    worst = 0.0
    for exact, approx in ((gx, fd_gradient[0]), (gy, fd_gradient[1]), (lap, fd_laplacian)):
        exact = np.broadcast_to(np.asarray(exact, dtype=float), x.shape)
        gap = np.abs(exact - approx) / np.maximum(1.0, np.abs(exact))
        worst = max(worst, float(gap.max()))
    if worst > tol:
        raise InvalidArgumentError(f"Derivatives of {problem.name} disagree with finite differences "
                         f"(relative gap {worst:.2e} > {tol:.0e})")
    return worst
