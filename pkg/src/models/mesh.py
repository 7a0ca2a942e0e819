from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np


class DiagonalRule(Enum):
    UNIFORM_NE = "uniform-ne"
    CORNER_SAFE = "corner-safe"


@dataclass(frozen=True)
class Rectangle:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError(f"Rectangle corners out of order: ({self.x0}, {self.y0}) -> ({self.x1}, {self.y1})")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, x: np.ndarray, y: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        return ((x >= self.x0 - tol) & (x <= self.x1 + tol) &
                (y >= self.y0 - tol) & (y <= self.y1 + tol))

    @classmethod
    def parse(cls, text: str) -> "Rectangle":
        """Parse 'x0,y0,x1,y1'"""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"Expected x0,y0,x1,y1 but got '{text}'")
        return cls(*(float(p) for p in parts))

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation with edge topology.

    Local edge k of a triangle joins its vertices k and k+1 (mod 3). Every
    edge is stored in the counter-clockwise order of its plus triangle, so
    the normal (dy, -dx)/h_e points out of the plus triangle. The plus
    triangle of an interior edge is the one with the larger index;
    edge_minus is -1 on boundary edges.
    """
    vertices: np.ndarray
    triangles: np.ndarray
    edge_vertices: np.ndarray
    edge_plus: np.ndarray
    edge_minus: np.ndarray
    edge_plus_local: np.ndarray
    edge_minus_local: np.ndarray
    normals: np.ndarray
    edge_lengths: np.ndarray
    boundary: np.ndarray
    areas: np.ndarray
    diameters: np.ndarray
    barycentric: np.ndarray
    triangle_edges: np.ndarray
    domain: Rectangle
    spacing: Optional[float] = None

    @property
    def num_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @property
    def num_edges(self) -> int:
        return int(self.edge_vertices.shape[0])

    @property
    def num_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def num_dofs(self) -> int:
        return 3 * self.num_triangles

    @property
    def interior(self) -> np.ndarray:
        return ~self.boundary

    @property
    def grad_basis(self) -> np.ndarray:
        """(nt, 3, 2) constant gradients of the barycentric basis"""
        return self.barycentric[:, :, 1:]

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @property
    def reported_h(self) -> float:
        """Grid spacing when known, else the largest element diameter"""
        if self.spacing is not None:
            return float(self.spacing)
        return float(self.diameters.max())


@dataclass
class MeshReport:
    h: float
    min_diameter: float
    max_diameter: float
    double_boundary_count: int
    quasi_uniformity: float
    double_boundary_elements: List[int] = field(default_factory=list)
    quasi_uniform: bool = True
    sigma_zero_warning: bool = False

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "min_diameter": self.min_diameter,
            "max_diameter": self.max_diameter,
            "double_boundary_count": self.double_boundary_count,
            "quasi_uniformity": self.quasi_uniformity,
            "quasi_uniform": self.quasi_uniform,
            "sigma_zero_warning": self.sigma_zero_warning,
        }
