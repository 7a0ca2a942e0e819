import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from src.engine.quadrature import edge_rule, triangle_rule
from src.models.dg_function import DGFunction
from src.models.errors import GeometryError, NumericError
from src.models.mesh import Mesh
from src.models.problem import ScalarField, evaluate_scalar

_MASS_PATTERN = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
_INVERSE_MASS_PATTERN = np.array([[9.0, -3.0, -3.0], [-3.0, 9.0, -3.0], [-3.0, -3.0, 9.0]])


@dataclass(frozen=True, eq=False)
class ElementTable:
    points: np.ndarray   # (nt, nq, 2)
    weights: np.ndarray  # (nt, nq), physical
    basis: np.ndarray    # (nq, 3)


@dataclass(frozen=True, eq=False)
class EdgeTable:
    points: np.ndarray   # (ne, nq, 2)
    weights: np.ndarray  # (ne, nq), physical
    plus: np.ndarray     # (ne, nq, 3) plus-side basis traces
    minus: np.ndarray    # (ne, nq, 3) minus-side traces, zero on boundary edges


def local_mass_matrix(mesh: Mesh, element: int) -> np.ndarray:
    area = float(mesh.areas[element])
    if area <= 0:
        raise GeometryError("Zero-area element has no mass matrix", element)
    return area * _MASS_PATTERN


class DGSpace:
    """Broken piecewise-linear space on a mesh, dofs ordered element-major"""

    def __init__(self, mesh: Mesh, assembly_degree: int = 4):
        self.mesh = mesh
        self.assembly_degree = assembly_degree
        self._element_tables: Dict[int, ElementTable] = {}
        self._edge_tables: Dict[int, EdgeTable] = {}
        self._mass: Optional[sp.csr_matrix] = None
        self._inverse_mass: Optional[sp.csr_matrix] = None
        self._cache: Dict[object, object] = {}
        self.logger = logging.getLogger("DGSpace")
        if (mesh.areas <= 0).any():
            raise GeometryError("Zero-area element", int(np.argmax(mesh.areas <= 0)))

    @property
    def num_dofs(self) -> int:
        return self.mesh.num_dofs

    def cached(self, key, factory: Callable):
        """Memoize derived objects such as operators on this space"""
        if key not in self._cache:
            self._cache[key] = factory()
        return self._cache[key]

    def element_table(self, degree: Optional[int] = None) -> ElementTable:
        degree = self.assembly_degree if degree is None else degree
        if degree not in self._element_tables:
            rule = triangle_rule(degree)
            corners = self.mesh.vertices[self.mesh.triangles]  # (nt, 3, 2)
            points = np.einsum("qk,tkd->tqd", rule.points, corners)
            weights = 2.0 * self.mesh.areas[:, None] * rule.weights[None, :]
            self._element_tables[degree] = ElementTable(points, weights, rule.points.copy())
        return self._element_tables[degree]

    def edge_table(self, degree: Optional[int] = None) -> EdgeTable:
        degree = self.assembly_degree if degree is None else degree
        if degree not in self._edge_tables:
            self._edge_tables[degree] = self._build_edge_table(degree)
        return self._edge_tables[degree]

    def _build_edge_table(self, degree: int) -> EdgeTable:
        mesh = self.mesh
        rule = edge_rule(degree)
        t = rule.points
        a = mesh.vertices[mesh.edge_vertices[:, 0]]
        b = mesh.vertices[mesh.edge_vertices[:, 1]]
        points = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
        weights = mesh.edge_lengths[:, None] * rule.weights[None, :]

        ne, nq = mesh.num_edges, t.size
        rows = np.arange(ne)
        plus = np.zeros((ne, nq, 3))
        kp = mesh.edge_plus_local
        plus[rows, :, kp] = 1.0 - t[None, :]
        plus[rows, :, (kp + 1) % 3] = t[None, :]

        # The minus triangle runs the edge from b back to a
        minus = np.zeros((ne, nq, 3))
        interior = np.flatnonzero(mesh.interior)
        km = mesh.edge_minus_local[interior]
        minus[interior, :, km] = t[None, :]
        minus[interior, :, (km + 1) % 3] = 1.0 - t[None, :]
        return EdgeTable(points, weights, plus, minus)

    # -- global block matrices -------------------------------------------------

    def assemble_blocks(self, row_elements: np.ndarray, col_elements: np.ndarray,
                        blocks: np.ndarray) -> sp.csr_matrix:
        """Scatter 3x3 blocks (rows test, columns trial); negative element ids are skipped"""
        row_elements = np.asarray(row_elements)
        col_elements = np.asarray(col_elements)
        keep = (row_elements >= 0) & (col_elements >= 0)
        row_elements, col_elements, blocks = row_elements[keep], col_elements[keep], blocks[keep]
        local = np.arange(3)
        rows = 3 * row_elements[:, None, None] + local[None, :, None]
        cols = 3 * col_elements[:, None, None] + local[None, None, :]
        rows = np.broadcast_to(rows, blocks.shape)
        cols = np.broadcast_to(cols, blocks.shape)
        n = self.num_dofs
        return sp.coo_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()

    def block_diagonal(self, blocks: np.ndarray) -> sp.csr_matrix:
        elements = np.arange(self.mesh.num_triangles)
        return self.assemble_blocks(elements, elements, blocks)

    def mass_blocks(self) -> np.ndarray:
        return self.mesh.areas[:, None, None] * _MASS_PATTERN[None, :, :]

    def inverse_mass_blocks(self) -> np.ndarray:
        return _INVERSE_MASS_PATTERN[None, :, :] / self.mesh.areas[:, None, None]

    def mass_matrix(self) -> sp.csr_matrix:
        if self._mass is None:
            self._mass = self.block_diagonal(self.mass_blocks())
        return self._mass

    def inverse_mass_matrix(self) -> sp.csr_matrix:
        if self._inverse_mass is None:
            self._inverse_mass = self.block_diagonal(self.inverse_mass_blocks())
        return self._inverse_mass

    def local_mass_matrix(self, element: int) -> np.ndarray:
        return local_mass_matrix(self.mesh, element)

    def weighted_mass_matrix(self, coefficient: np.ndarray, degree: Optional[int] = None) -> sp.csr_matrix:
        """(c v, w) for c sampled at the element quadrature points"""
        table = self.element_table(degree)
        blocks = np.einsum("tq,qa,qb->tab", table.weights * coefficient, table.basis, table.basis)
        return self.block_diagonal(blocks)

    def edge_blocks(self, coefficient: np.ndarray, degree: Optional[int] = None) -> Dict[str, np.ndarray]:
        """Edge integrals of c times products of traces, keyed by (test side, trial side)"""
        table = self.edge_table(degree)
        cw = table.weights * coefficient
        sides = {"p": table.plus, "m": table.minus}
        return {
            test + trial: np.einsum("eq,eqa,eqb->eab", cw, sides[test], sides[trial])
            for test in "pm" for trial in "pm"
        }

    def edge_load(self, values: np.ndarray, degree: Optional[int] = None,
                  side: str = "plus") -> np.ndarray:
        """Vector of edge integrals of values against one side's traces"""
        table = self.edge_table(degree)
        traces = table.plus if side == "plus" else table.minus
        elements = self.mesh.edge_plus if side == "plus" else self.mesh.edge_minus
        local = np.einsum("eq,eqa->ea", table.weights * values, traces)
        out = np.zeros(self.num_dofs)
        keep = elements >= 0
        idx = 3 * elements[keep][:, None] + np.arange(3)[None, :]
        np.add.at(out, idx.ravel(), local[keep].ravel())
        return out

    def element_load(self, values: np.ndarray, degree: Optional[int] = None) -> np.ndarray:
        table = self.element_table(degree)
        return np.einsum("tq,qa->ta", table.weights * values, table.basis).ravel()

    # -- functions --------------------------------------------------------------

    def l2_project(self, fn: ScalarField, degree: Optional[int] = None) -> DGFunction:
        table = self.element_table(degree)
        values = evaluate_scalar(fn, table.points[..., 0], table.points[..., 1])
        load = self.element_load(values, degree).reshape(-1, 3)
        coeffs = np.einsum("tab,tb->ta", self.inverse_mass_blocks(), load)
        residual = np.einsum("tab,tb->ta", self.mass_blocks(), coeffs) - load
        scale = np.maximum(np.abs(load).max(axis=1), np.finfo(float).tiny)
        worst = float((np.abs(residual).max(axis=1) / scale).max())
        if worst > 1e-12:
            raise NumericError(f"Local projection solve residual {worst:.3e} exceeds 1e-12")
        return DGFunction(self.mesh, coeffs.ravel())

    def evaluate(self, function: DGFunction, element: int, point: Sequence[float]) -> float:
        return function.evaluate(element, point)

    def element_values(self, coefficients: np.ndarray, degree: Optional[int] = None) -> np.ndarray:
        table = self.element_table(degree)
        return np.asarray(coefficients).reshape(-1, 3) @ table.basis.T

    def element_gradients(self, coefficients: np.ndarray) -> np.ndarray:
        """(nt, 2) constant gradient per element"""
        return np.einsum("ta,tad->td", np.asarray(coefficients).reshape(-1, 3), self.mesh.grad_basis)

    def edge_traces(self, coefficients: np.ndarray, degree: Optional[int] = None):
        """Plus and minus traces at edge quadrature points; minus is zero on the boundary"""
        table = self.edge_table(degree)
        local = np.asarray(coefficients).reshape(-1, 3)
        plus = np.einsum("eqa,ea->eq", table.plus, local[self.mesh.edge_plus])
        minus_elements = np.where(self.mesh.edge_minus >= 0, self.mesh.edge_minus, 0)
        minus = np.einsum("eqa,ea->eq", table.minus, local[minus_elements])
        return plus, minus

    def element_mass_norms(self, coefficients: np.ndarray) -> np.ndarray:
        """Per-element squared L2 norm of a DG function"""
        local = np.asarray(coefficients).reshape(-1, 3)
        return np.einsum("ta,tab,tb->t", local, self.mass_blocks(), local)

    def sample(self, fn: Callable, degree: Optional[int] = None) -> np.ndarray:
        table = self.element_table(degree)
        return evaluate_scalar(fn, table.points[..., 0], table.points[..., 1])


def as_space(mesh_or_space, assembly_degree: int = 4) -> DGSpace:
    if isinstance(mesh_or_space, DGSpace):
        return mesh_or_space
    return DGSpace(mesh_or_space, assembly_degree)
