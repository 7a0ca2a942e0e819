from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import scipy.sparse as sp

from src.models.errors import InvalidArgumentError
from src.models.problem import PenaltyPolicy


class AssemblyPath(Enum):
    CALCULUS = "calculus"
    CENTERED_FLUX = "centered-flux"


@dataclass(eq=False)
class SparseOperator:
    """Affine map v -> matrix @ v + load on DG coefficient vectors"""
    matrix: sp.csr_matrix
    load: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix)
        rows, cols = self.matrix.shape
        if rows != cols:
            raise InvalidArgumentError(f"Operator {self.name} is not square: {self.matrix.shape}")
        if self.load is not None:
            self.load = np.asarray(self.load, dtype=float)
            if self.load.shape != (rows,):
                raise InvalidArgumentError(f"Operator {self.name} load has shape {self.load.shape}")

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, coefficients: np.ndarray) -> np.ndarray:
        out = self.matrix @ np.asarray(coefficients, dtype=float)
        if self.load is not None:
            out = out + self.load
        return out

    def linear(self, coefficients: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(coefficients, dtype=float)

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        return _combine(self, other, 1.0, 1.0)

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        return _combine(self, other, 1.0, -1.0)

    def scaled(self, factor: float) -> "SparseOperator":
        load = None if self.load is None else factor * self.load
        return SparseOperator(factor * self.matrix, load, self.name)


def _combine(a: SparseOperator, b: SparseOperator, ca: float, cb: float) -> SparseOperator:
    if a.load is None and b.load is None:
        load = None
    else:
        zeros = np.zeros(a.shape[0])
        load = ca * (zeros if a.load is None else a.load) + cb * (zeros if b.load is None else b.load)
    return SparseOperator(ca * a.matrix + cb * b.matrix, load, a.name or b.name)


@dataclass(eq=False)
class FormMatrices:
    """Assembled forms; rows index test functions, columns trial functions"""
    a_ar: sp.csr_matrix
    upwind_penalty: sp.csr_matrix
    diffusion: Optional[sp.csr_matrix]
    total: sp.csr_matrix
    rhs: np.ndarray
    eps: float
    penalty: PenaltyPolicy
    path: AssemblyPath

    @property
    def a_upw(self) -> sp.csr_matrix:
        return (self.a_ar + self.upwind_penalty).tocsr()

    @property
    def num_dofs(self) -> int:
        return int(self.total.shape[0])

    def consistency_defect(self) -> float:
        """Relative max entry of total - (eps A_d + A_ar + A_upw_penalty)"""
        rebuilt = self.a_ar + self.upwind_penalty
        if self.diffusion is not None:
            rebuilt = rebuilt + self.eps * self.diffusion
        diff = (self.total - rebuilt).tocsr()
        scale = max(abs(self.total).max(), np.finfo(float).tiny)
        return float(abs(diff).max() / scale) if diff.nnz else 0.0
