from typing import Optional

import numpy as np


class DGError(Exception):
    """Base class for every solver failure surfaced to callers"""


class InvalidArgumentError(DGError, ValueError):
    pass


class TopologyError(DGError):
    def __init__(self, message: str, entity_index: Optional[int] = None):
        self.entity_index = entity_index
        if entity_index is not None:
            message = f"{message} (entity {entity_index})"
        super().__init__(message)


class GeometryError(DGError):
    def __init__(self, message: str, element: Optional[int] = None):
        self.element = element
        if element is not None:
            message = f"{message} (element {element})"
        super().__init__(message)


class SolverError(DGError):
    """Direct factorization failed or produced an unusable solution"""

    def __init__(self, message: str, min_pivot: Optional[float] = None,
                 max_pivot: Optional[float] = None, pivot_index: Optional[int] = None):
        self.min_pivot = min_pivot
        self.max_pivot = max_pivot
        self.pivot_index = pivot_index
        if min_pivot is not None:
            message = (f"{message} (min |pivot| {min_pivot:.3e} at {pivot_index}, "
                       f"max |pivot| {max_pivot:.3e})")
        super().__init__(message)


class ConvergenceError(DGError):
    """Iterative solve stopped before reaching its tolerance"""

    def __init__(self, message: str, best_iterate: np.ndarray, residual: float, iterations: int):
        self.best_iterate = best_iterate
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (relative residual {residual:.3e} after {iterations} iterations)")


class CapabilityError(DGError):
    def __init__(self, missing: str):
        self.missing = missing
        super().__init__(f"Missing capability: {missing}")


class NumericError(DGError):
    pass
