from dataclasses import dataclass, field
import math
from typing import Dict, List, Optional

NORM_NAMES = (
    "l2", "ar", "upw", "upw_star", "upw_sharp",
    "d", "h", "h_star", "h_sharp", "h_sharp_star",
)

NORM_LABELS = {
    "l2": "L2",
    "ar": "ar",
    "upw": "upw",
    "upw_star": "upw,*",
    "upw_sharp": "upw#",
    "d": "d",
    "h": "h",
    "h_star": "h,*",
    "h_sharp": "h#",
    "h_sharp_star": "h#,*",
}


@dataclass
class SolveReport:
    method: str
    dofs: int
    relative_residual: float
    wall_time: float
    iterations: int = 0
    factor_nnz: int = 0
    min_pivot: Optional[float] = None
    max_pivot: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "dofs": self.dofs,
            "relative_residual": self.relative_residual,
            "wall_time": self.wall_time,
            "iterations": self.iterations,
            "factor_nnz": self.factor_nnz,
            "min_pivot": self.min_pivot,
            "max_pivot": self.max_pivot,
        }


@dataclass
class NormReport:
    l2: float
    ar: float
    upw: float
    upw_star: float
    upw_sharp: float
    d: float
    h: float
    h_star: float
    h_sharp: float
    h_sharp_star: float
    quadrature_saturated: bool = False

    def as_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in NORM_NAMES}

    def __getitem__(self, name: str) -> float:
        if name not in NORM_NAMES:
            raise KeyError(name)
        return getattr(self, name)


@dataclass
class ConvergenceRow:
    h: float
    sigma: float
    errors: Dict[str, float]
    rates: Dict[str, Optional[float]] = field(default_factory=dict)
    saturated: bool = False
    residual: float = 0.0
    # Position in the planned level list; None when the row stands alone
    level: Optional[int] = None


def observed_rate(coarse_error: float, fine_error: float, coarse_h: float, fine_h: float) -> Optional[float]:
    if coarse_error <= 0 or fine_error <= 0 or coarse_h <= fine_h:
        return None
    return math.log(coarse_error / fine_error) / math.log(coarse_h / fine_h)


@dataclass
class ConvergenceReport:
    example: str
    eps: float
    rows: List[ConvergenceRow]
    norms: List[str]
    metadata: Dict[str, object] = field(default_factory=dict)

    @staticmethod
    def _coarse_partner(previous: Dict[float, ConvergenceRow], row: ConvergenceRow) -> Optional[ConvergenceRow]:
        """Row of the same sigma one level coarser, or None across a missing level"""
        coarse = previous.get(row.sigma)
        if coarse is None:
            return None
        if row.level is not None and coarse.level is not None and row.level != coarse.level + 1:
            return None
        return coarse

    def compute_rates(self) -> None:
        """Rates between consecutive levels of the same sigma"""
        previous: Dict[float, ConvergenceRow] = {}
        for row in self.rows:
            coarse = self._coarse_partner(previous, row)
            row.rates = {}
            for name in self.norms:
                if coarse is None:
                    row.rates[name] = None
                else:
                    row.rates[name] = observed_rate(coarse.errors[name], row.errors[name], coarse.h, row.h)
            previous[row.sigma] = row

    def verify_rates(self, tol: float = 1e-12) -> bool:
        previous: Dict[float, ConvergenceRow] = {}
        for row in self.rows:
            coarse = self._coarse_partner(previous, row)
            for name in self.norms:
                expected = None if coarse is None else observed_rate(
                    coarse.errors[name], row.errors[name], coarse.h, row.h)
                stored = row.rates.get(name)
                if (expected is None) != (stored is None):
                    return False
                if expected is not None and abs(expected - stored) > tol:
                    return False
            previous[row.sigma] = row
        return True

    def rows_for(self, sigma: float) -> List[ConvergenceRow]:
        return [row for row in self.rows if row.sigma == sigma]

    def final_rate(self, name: str, sigma: float) -> Optional[float]:
        rows = self.rows_for(sigma)
        return rows[-1].rates.get(name) if rows else None


@dataclass
class PropertyResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


@dataclass
class ValidationReport:
    scale: str
    results: List[PropertyResult] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)

    def failures(self) -> List[PropertyResult]:
        return [result for result in self.results if not result.passed]

    def add(self, name: str, value: float, tolerance: float, passed: Optional[bool] = None,
            detail: str = "") -> PropertyResult:
        if passed is None:
            passed = bool(value <= tolerance)
        result = PropertyResult(name, bool(passed), float(value), float(tolerance), detail)
        self.results.append(result)
        return result

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "passed": self.passed,
            "elapsed": self.elapsed,
            "results": [r.to_dict() for r in self.results],
        }
