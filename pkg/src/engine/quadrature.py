from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations
from typing import Callable, Dict, List, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from src.models.errors import InvalidArgumentError


@dataclass(frozen=True, eq=False)
class QuadRule:
    """Points are barycentric triples (triangle) or parameters in [0, 1] (edge)"""
    points: np.ndarray
    weights: np.ndarray
    degree: int
    kind: str

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    @property
    def reference_points(self) -> np.ndarray:
        """Cartesian points on the reference triangle (0,0), (1,0), (0,1)"""
        if self.kind != "triangle":
            return self.points
        return self.points[:, 1:]

    def integrate_reference(self, fn: Callable) -> float:
        if self.kind == "triangle":
            pts = self.reference_points
            return float(np.dot(self.weights, fn(pts[:, 0], pts[:, 1])))
        return float(np.dot(self.weights, fn(self.points)))

    def map_to_triangle(self, corners: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Physical points and weights on a triangle given by three corners"""
        corners = np.asarray(corners, dtype=float)
        e1 = corners[1] - corners[0]
        e2 = corners[2] - corners[0]
        area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
        return self.points @ corners, self.weights * (2.0 * area)

    def map_to_edge(self, a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        pts = a[None, :] + self.points[:, None] * (b - a)[None, :]
        return pts, self.weights * float(np.linalg.norm(b - a))


# Symmetric orbits of the Dunavant rules: (orbit, weight), weights relative to area 1.
_DUNAVANT: Dict[int, List[Tuple[Tuple[float, ...], float]]] = {
    2: [
        ((1.0 / 6.0,), 1.0 / 3.0),
    ],
    4: [
        ((0.445948490915965,), 0.223381589678011),
        ((0.091576213509771,), 0.109951743655322),
    ],
    6: [
        ((0.249286745170910,), 0.116786275726379),
        ((0.063089014491502,), 0.050844906370207),
        ((0.053145049844817, 0.310352451033784), 0.082851075618374),
    ],
    8: [
        ((), 0.144315607677787),
        ((0.459292588292723,), 0.095091634267285),
        ((0.170569307751760,), 0.103217370534718),
        ((0.050547228317031,), 0.032458497623198),
        ((0.008394777409958, 0.263112829634638), 0.027230314174435),
    ],
}


def _expand_orbit(orbit: Tuple[float, ...]) -> List[Tuple[float, float, float]]:
    if len(orbit) == 0:
        return [(1.0 / 3.0,) * 3]
    if len(orbit) == 1:
        a = orbit[0]
        b = 1.0 - 2.0 * a
        return [(b, a, a), (a, b, a), (a, a, b)]
    a, b = orbit
    c = 1.0 - a - b
    return sorted(set(permutations((a, b, c))))


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadRule:
    if degree not in _DUNAVANT:
        raise InvalidArgumentError(
            f"Unsupported triangle quadrature degree {degree}; choose from {sorted(_DUNAVANT)}")
    points = []
    weights = []
    for orbit, weight in _DUNAVANT[degree]:
        for bary in _expand_orbit(orbit):
            points.append(bary)
            weights.append(weight)
    w = np.array(weights)
    w = 0.5 * w / w.sum()
    return QuadRule(np.array(points), w, degree, "triangle")


@lru_cache(maxsize=None)
def edge_rule(degree: int) -> QuadRule:
    """Gauss-Legendre on [0, 1], exact through the given degree"""
    if degree < 0 or degree > 41:
        raise InvalidArgumentError(f"Unsupported edge quadrature degree {degree}")
    n = max(1, (degree + 2) // 2)
    x, w = leggauss(n)
    return QuadRule(0.5 * (x + 1.0), 0.5 * w, degree, "edge")


def supported_triangle_degrees() -> List[int]:
    return sorted(_DUNAVANT)


def lower_degree(degree: int) -> int:
    """Next supported triangle degree below the given one"""
    lower = [d for d in _DUNAVANT if d < degree]
    if not lower:
        raise InvalidArgumentError(f"No supported triangle degree below {degree}")
    return max(lower)
