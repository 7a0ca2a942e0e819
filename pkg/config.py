import os
from dataclasses import dataclass, replace
from typing import Optional

THREADS_ENV = "DGCDR_THREADS"


@dataclass(frozen=True)
class SolverSettings:
    assembly_degree: int = 4
    error_degree: int = 8
    sign_tolerance: float = 1e-12
    quasi_uniformity_limit: float = 4.0
    saturation_threshold: float = 0.05
    solver_method: str = "direct"
    gmres_restart: int = 50
    iterative_max_iter: int = 2000
    direct_tolerance: float = 1e-10
    iterative_tolerance: float = 1e-8
    workers: int = 4
    mesh_rule: str = "uniform-ne"
    path: str = "centered-flux"
    infsup_max_dofs: int = 2048

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.solver_method not in ("direct", "iterative"):
            raise ValueError(f"Unknown solver method '{self.solver_method}'")

    @classmethod
    def from_env(cls, **overrides) -> "SolverSettings":
        """Defaults, then the thread-count environment variable, then explicit overrides"""
        values = {}
        threads: Optional[str] = os.environ.get(THREADS_ENV)
        if threads:
            try:
                values["workers"] = max(1, int(threads))
            except ValueError:
                raise ValueError(f"{THREADS_ENV} must be an integer, got '{threads}'")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def with_overrides(self, **overrides) -> "SolverSettings":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})
