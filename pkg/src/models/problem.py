from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from src.models.errors import InvalidArgumentError
from src.models.mesh import Mesh, Rectangle

# Field callables take coordinate arrays x, y of equal shape. Scalars return
# an array (or a number, broadcast); vector fields return a pair.
ScalarField = Callable[[np.ndarray, np.ndarray], np.ndarray]
VectorField = Callable[[np.ndarray, np.ndarray], tuple]


def evaluate_scalar(fn: ScalarField, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.array(np.broadcast_to(np.asarray(fn(x, y), dtype=float), x.shape))


def evaluate_vector(fn: VectorField, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Stack a vector field into shape x.shape + (2,)"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    first, second = fn(x, y)
    out = np.empty(x.shape + (2,))
    out[..., 0] = np.broadcast_to(np.asarray(first, dtype=float), x.shape)
    out[..., 1] = np.broadcast_to(np.asarray(second, dtype=float), x.shape)
    return out


def constant_scalar(value: float) -> ScalarField:
    return lambda x, y: np.full(np.shape(x), float(value))


def constant_vector(a: float, b: float) -> VectorField:
    return lambda x, y: (np.full(np.shape(x), float(a)), np.full(np.shape(x), float(b)))


@dataclass(frozen=True)
class PenaltyPolicy:
    """Jump penalty weights sigma_e of the diffusion form"""
    sigma: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise InvalidArgumentError(f"Penalty sigma_e must be >= 0, got {self.sigma}")

    @classmethod
    def constant(cls, sigma: float) -> "PenaltyPolicy":
        return cls(float(sigma))

    @classmethod
    def zero(cls) -> "PenaltyPolicy":
        return cls(0.0)

    @property
    def is_zero(self) -> bool:
        return self.sigma == 0.0

    def values(self, mesh: Mesh) -> np.ndarray:
        return np.full(mesh.num_edges, self.sigma)

    def label(self) -> str:
        return f"{self.sigma:g}"


@dataclass(frozen=True)
class ProblemSpec:
    """Data of -eps Lap u + div(zeta u) + (gamma - div zeta) u = f with u = g on the boundary"""
    name: str
    domain: Rectangle
    eps: float
    zeta: VectorField
    div_zeta: ScalarField
    gamma: ScalarField
    f: ScalarField
    g: ScalarField
    exact: Optional[ScalarField] = None
    exact_gradient: Optional[VectorField] = None
    exact_laplacian: Optional[ScalarField] = None
    gamma0: Optional[float] = None
    penalty: PenaltyPolicy = field(default_factory=lambda: PenaltyPolicy.constant(5.0))
    manufactured: bool = False
    # Rebuilds the problem for another eps when its data closes over eps
    rebuild: Optional[Callable[[float], "ProblemSpec"]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not np.isfinite(self.eps) or self.eps < 0:
            raise InvalidArgumentError(f"Diffusion eps must be >= 0, got {self.eps}")
        if self.domain.area <= 0:
            raise InvalidArgumentError(f"Domain {self.domain} has no area")

    @property
    def has_exact(self) -> bool:
        return self.exact is not None

    @property
    def is_reduced(self) -> bool:
        return self.eps == 0.0

    def with_eps(self, eps: float) -> "ProblemSpec":
        """Copy with a new eps; eps-dependent data is rebuilt, the penalty is kept"""
        if self.rebuild is not None:
            return replace(self.rebuild(float(eps)), penalty=self.penalty)
        if not self.manufactured:
            return replace(self, eps=float(eps))
        source = manufactured_source(float(eps), self.zeta, self.gamma,
                                     self.exact, self.exact_gradient, self.exact_laplacian)
        return replace(self, eps=float(eps), f=source)

    def with_penalty(self, penalty: PenaltyPolicy) -> "ProblemSpec":
        return replace(self, penalty=penalty)

    def pde_residual(self, x: np.ndarray, y: np.ndarray) -> tuple:
        """Pointwise f - (-eps Lap u + zeta.grad u + gamma u) and a magnitude scale"""
        if self.exact is None or self.exact_gradient is None or self.exact_laplacian is None:
            raise InvalidArgumentError(f"Problem {self.name} has no exact solution with derivatives")
        lap = evaluate_scalar(self.exact_laplacian, x, y)
        grad = evaluate_vector(self.exact_gradient, x, y)
        zeta = evaluate_vector(self.zeta, x, y)
        u = evaluate_scalar(self.exact, x, y)
        gamma = evaluate_scalar(self.gamma, x, y)
        f = evaluate_scalar(self.f, x, y)
        transport = zeta * grad
        terms = (-self.eps * lap, np.sum(transport, axis=-1), gamma * u)
        residual = f - sum(terms)
        # Componentwise so a cancelling zeta.grad u still sets the scale
        scale = (np.abs(f) + np.abs(terms[0]) + np.sum(np.abs(transport), axis=-1)
                 + np.abs(terms[2]))
        return residual, scale

    def verify_manufactured(self, x: np.ndarray, y: np.ndarray, tol: float = 1e-10) -> float:
        """Largest relative pointwise defect of the source; raises above tol"""
        residual, scale = self.pde_residual(x, y)
        relative = np.abs(residual) / np.maximum(scale, np.finfo(float).tiny)
        relative[np.abs(residual) == 0.0] = 0.0
        worst = float(relative.max()) if relative.size else 0.0
        if worst > tol:
            raise InvalidArgumentError(
                f"Source of problem {self.name} is inconsistent with its exact solution "
                f"(relative defect {worst:.3e} > {tol:.1e})")
        return worst

    def sample_grid(self, n: int = 5) -> tuple:
        xs = np.linspace(self.domain.x0, self.domain.x1, n)
        ys = np.linspace(self.domain.y0, self.domain.y1, n)
        return np.meshgrid(xs, ys, indexing="ij")


def manufactured_source(eps: float, zeta: VectorField, gamma: ScalarField,
                        exact: ScalarField, exact_gradient: VectorField,
                        exact_laplacian: ScalarField) -> ScalarField:
    def source(x, y):
        grad = evaluate_vector(exact_gradient, x, y)
        z = evaluate_vector(zeta, x, y)
        return (-eps * evaluate_scalar(exact_laplacian, x, y)
                + np.sum(z * grad, axis=-1)
                + evaluate_scalar(gamma, x, y) * evaluate_scalar(exact, x, y))
    return source
