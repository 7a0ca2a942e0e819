from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.models.errors import InvalidArgumentError
from src.models.mesh import Mesh


@dataclass(eq=False)
class DGFunction:
    """Piecewise-linear function, three barycentric coefficients per triangle"""
    mesh: Mesh
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        expected = self.mesh.num_dofs
        if self.coefficients.shape != (expected,):
            raise InvalidArgumentError(
                f"DGFunction needs {expected} coefficients, got shape {self.coefficients.shape}")

    @classmethod
    def zeros(cls, mesh: Mesh) -> "DGFunction":
        return cls(mesh, np.zeros(mesh.num_dofs))

    @classmethod
    def from_vertex_values(cls, mesh: Mesh, values: np.ndarray) -> "DGFunction":
        """Continuous function given by one value per mesh vertex"""
        values = np.asarray(values, dtype=float)
        return cls(mesh, values[mesh.triangles].reshape(-1))

    @property
    def local(self) -> np.ndarray:
        """(nt, 3) view of the coefficients"""
        return self.coefficients.reshape(-1, 3)

    def evaluate(self, element: int, point: Sequence[float], tol: float = 1e-10) -> float:
        if not 0 <= element < self.mesh.num_triangles:
            raise InvalidArgumentError(
                f"Element {element} out of range [0, {self.mesh.num_triangles})")
        x, y = float(point[0]), float(point[1])
        lam = self.mesh.barycentric[element] @ np.array([1.0, x, y])
        if lam.min() < -tol:
            raise InvalidArgumentError(f"Point ({x}, {y}) lies outside element {element}")
        return float(self.local[element] @ lam)

    def __add__(self, other: "DGFunction") -> "DGFunction":
        return DGFunction(self.mesh, self.coefficients + other.coefficients)

    def __sub__(self, other: "DGFunction") -> "DGFunction":
        return DGFunction(self.mesh, self.coefficients - other.coefficients)

    def __mul__(self, scale: float) -> "DGFunction":
        return DGFunction(self.mesh, self.coefficients * scale)

    __rmul__ = __mul__
