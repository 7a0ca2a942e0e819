"""Property suite for the discrete calculus, the bilinear forms and the solver.

Every check reports a relative defect against a tolerance. ``quick`` runs on
meshes with h >= 1/8; ``full`` adds h = 1/16 and the inf-sup sweep.
"""
import logging
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from config import SolverSettings
from src.engine.assembly import (assemble_convection_reaction, assemble_dwdg_diffusion, assemble_full,
                                 assemble_upwind_penalty, centered_flux_form)
from src.engine.dense_oracle import (dense_div_zeta, dense_dwdg, dense_mass, dense_partial,
                                     dense_upwind_penalty)
from src.engine.dg_calculus import (BoundaryMode, boundary_flux_form, build_div_zeta, build_partial,
                                    build_trace_selector, div_zeta_form)
from src.engine.dg_space import DGSpace
from src.engine.inf_sup import estimate_infsup
from src.engine.mesh_builder import generate_structured_rect
from src.engine.norms import DiscreteField, norm_components
from src.engine.pipeline import solve_problem
from src.engine.problems import UNIT_SQUARE, example_names, get_example, manufactured
from src.models.errors import DGError
from src.models.dg_function import DGFunction
from src.models.mesh import DiagonalRule
from src.models.problem import (PenaltyPolicy, ProblemSpec, ScalarField, VectorField,
                                constant_scalar, constant_vector)
from src.models.reports import ValidationReport

logger = logging.getLogger("Validation")

SCALES = ("quick", "full")
IDENTITY_TOLERANCE = 1e-11
DWDG_TOLERANCE = 1e-12
SYMMETRY_TOLERANCE = 1e-13
ORACLE_TOLERANCE = 1e-12
AFFINE_TOLERANCE = 1e-10
ORACLE_MAX_ELEMENTS = 64
INFSUP_LEVEL_RATIO = 0.5


@dataclass(frozen=True)
class Transport:
    """A velocity field with gamma chosen so that gamma - div(zeta)/2 = 1"""
    label: str
    zeta: VectorField
    div_zeta: ScalarField
    gamma: ScalarField


TRANSPORTS = (
    Transport("const", constant_vector(1.0, 1.0), constant_scalar(0.0), constant_scalar(1.0)),
    Transport("radial", lambda x, y: (x, y), constant_scalar(2.0), constant_scalar(2.0)),
)


def _levels(scale: str) -> Tuple[int, ...]:
    return (4, 8) if scale == "quick" else (4, 8, 16)


def _unit_mesh(n: int, rule: DiagonalRule = DiagonalRule.UNIFORM_NE):
    return generate_structured_rect(UNIT_SQUARE, n, n, rule)


def _transport_problem(transport: Transport, eps: float = 1e-2) -> ProblemSpec:
    return ProblemSpec(
        name=f"validation-{transport.label}",
        domain=UNIT_SQUARE,
        eps=eps,
        zeta=transport.zeta,
        div_zeta=transport.div_zeta,
        gamma=transport.gamma,
        f=constant_scalar(1.0),
        g=constant_scalar(0.0),
    )


def _bilinear(matrix, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Column-wise a(v_k, w_k) = w_k^T A v_k"""
    return np.einsum("nk,nk->k", w, matrix @ v)


def _worst_relative(residual: np.ndarray, *terms: np.ndarray) -> float:
    scale = sum(np.abs(t) for t in terms)
    scale = np.where(scale == 0.0, 1.0, scale)
    return float(np.max(np.abs(residual) / scale))


def _matrix_gap(sparse_matrix, dense: np.ndarray) -> float:
    actual = sparse_matrix.toarray() if sp.issparse(sparse_matrix) else np.asarray(sparse_matrix)
    scale = max(float(np.abs(dense).max()), 1e-300)
    return float(np.abs(actual - dense).max() / scale)


def _squared_norms(space: DGSpace, problem: ProblemSpec, samples: np.ndarray,
                   penalty: PenaltyPolicy) -> List[dict]:
    return [norm_components(DiscreteField(space, samples[:, k]), problem, None, penalty, space.assembly_degree)
            for k in range(samples.shape[1])]


class ValidationSuite:
    """Runs the operator identities and solver checks and collects a ValidationReport"""

    def __init__(self, scale: str = "quick", seed: int = 20240917, samples: int = 50,
                 settings: Optional[SolverSettings] = None):
        if scale not in SCALES:
            raise ValueError(f"Validation scale must be one of {SCALES}, got '{scale}'")
        self.scale = scale
        self.seed = seed
        self.samples = samples
        self.settings = settings or SolverSettings()
        self.rng = np.random.default_rng(seed)
        self.report = ValidationReport(scale)
        self.logger = logger

    def _random(self, space: DGSpace, count: int) -> np.ndarray:
        return self.rng.standard_normal((space.num_dofs, count))

    def _guarded(self, name: str, check: Callable[[], None]) -> None:
        try:
            check()
        except DGError as exc:
            self.logger.error(f"Property {name} raised {type(exc).__name__}: {exc}")
            self.report.add(name, float("inf"), 0.0, passed=False, detail=str(exc))

    def check_trace_selectors(self, space: DGSpace, tag: str) -> None:
        mesh = space.mesh
        interior = mesh.interior
        worst = 0.0
        for direction in (0, 1):
            selector = build_trace_selector(space, direction, self.settings.sign_tolerance)
            half_sign = 0.5 * selector.signs
            for side, sign in (("+", 1.0), ("-", -1.0)):
                alpha, beta = selector.weights(side)
                worst = max(worst,
                            float(np.abs(alpha - (0.5 + sign * half_sign))[interior].max()),
                            float(np.abs(beta - (0.5 - sign * half_sign))[interior].max()))
        self.report.add(f"trace-selector[{tag}]", worst, 1e-15)

    def check_calculus_identities(self, space: DGSpace, transport: Transport, tag: str) -> None:
        v = self._random(space, self.samples)
        phi = self._random(space, self.samples)
        right = div_zeta_form(space, transport.zeta, "+", self.settings.sign_tolerance)
        left = div_zeta_form(space, transport.zeta, "-", self.settings.sign_tolerance)
        divergence = space.weighted_mass_matrix(space.sample(transport.div_zeta))
        boundary = boundary_flux_form(space, transport.zeta)

        for first, second, label in ((right, left, "+"), (left, right, "-")):
            a = _bilinear(first, v, phi)
            b = _bilinear(second, phi, v)
            c = _bilinear(divergence, v, phi)
            d = _bilinear(boundary, v, phi)
            self.report.add(f"ibp-identity{label}[{tag}]", _worst_relative(a + b - c - d, a, b, c, d),
                            IDENTITY_TOLERANCE)

        averaged = _bilinear(div_zeta_form(space, transport.zeta, "avg", self.settings.sign_tolerance), v, phi)
        centered = _bilinear(centered_flux_form(space, transport.zeta, transport.div_zeta), v, phi)
        self.report.add(f"centered-flux-equivalence[{tag}]",
                        _worst_relative(averaged - centered, averaged, centered), IDENTITY_TOLERANCE)

    def check_coercivity(self, space: DGSpace, transport: Transport, tag: str) -> None:
        problem = _transport_problem(transport)
        penalty = PenaltyPolicy.constant(5.0)
        count = 2 * self.samples
        v = self._random(space, count)
        parts = _squared_norms(space, problem, v, penalty)
        ar_squared = np.array([p["l2"] + p["boundary_flux"] for p in parts])
        jumps = np.array([p["upwind_jumps"] for p in parts])
        d_squared = np.array([p["one_sided_gradients"] + p["jump_penalty"] for p in parts])

        a_ar = assemble_convection_reaction(space, transport.zeta, transport.div_zeta, transport.gamma,
                                            self.settings.path)
        ar_form = _bilinear(a_ar, v, v)
        self.report.add(f"coercivity-ar[{tag}]", _worst_relative(ar_form - ar_squared, ar_form, ar_squared),
                        IDENTITY_TOLERANCE)

        upw_form = ar_form + _bilinear(assemble_upwind_penalty(space, transport.zeta), v, v)
        upw_squared = ar_squared + jumps
        self.report.add(f"coercivity-upw[{tag}]",
                        _worst_relative(upw_form - upw_squared, upw_form, upw_squared), IDENTITY_TOLERANCE)

        diffusion = assemble_dwdg_diffusion(space, penalty)
        d_form = _bilinear(diffusion, v, v)
        self.report.add(f"dwdg-norm-identity[{tag}]", _worst_relative(d_form - d_squared, d_form, d_squared),
                        DWDG_TOLERANCE)

        forms = assemble_full(space, problem, penalty, self.settings.path)
        total = _bilinear(forms.total, v, v)
        split = problem.eps * d_form + upw_form
        self.report.add(f"full-form-identity[{tag}]", _worst_relative(total - split, total, split),
                        IDENTITY_TOLERANCE)

    def check_dwdg(self, space: DGSpace, tag: str) -> None:
        diffusion = assemble_dwdg_diffusion(space, PenaltyPolicy.constant(5.0))
        asymmetry = abs(diffusion - diffusion.T).max() / abs(diffusion).max()
        self.report.add(f"dwdg-symmetry[{tag}]", float(asymmetry), SYMMETRY_TOLERANCE)

        count = 2 * self.samples
        v = self._random(space, count)
        w = self._random(space, count)
        pairing = np.abs(_bilinear(diffusion, v, w))
        bound = np.sqrt(_bilinear(diffusion, v, v) * _bilinear(diffusion, w, w))
        excess = float(np.max(pairing / bound - 1.0))
        self.report.add(f"dwdg-cauchy-schwarz[{tag}]", max(excess, 0.0), DWDG_TOLERANCE)

    def check_dense_oracle(self, n: int, rule: DiagonalRule) -> None:
        mesh = _unit_mesh(n, rule)
        if mesh.num_triangles > ORACLE_MAX_ELEMENTS:
            return
        space = DGSpace(mesh, self.settings.assembly_degree)
        tag = f"h=1/{n},{rule.value}"
        data = lambda x, y: x + 2.0 * y
        worst = _matrix_gap(space.mass_matrix(), dense_mass(mesh))
        for direction in (0, 1):
            for side in ("+", "-"):
                for mode in BoundaryMode:
                    operator = build_partial(space, direction, side, mode, data, self.settings.sign_tolerance)
                    matrix, load = dense_partial(mesh, direction, side, mode.value, data)
                    worst = max(worst, _matrix_gap(operator.matrix, matrix))
                    if load is not None:
                        worst = max(worst, float(np.abs(operator.load - load).max() / max(np.abs(load).max(), 1.0)))
        for transport in TRANSPORTS:
            for side in ("+", "-", "avg"):
                operator = build_div_zeta(space, transport.zeta, side, self.settings.sign_tolerance)
                worst = max(worst, _matrix_gap(operator.matrix, dense_div_zeta(mesh, transport.zeta, side)))
            worst = max(worst, _matrix_gap(assemble_upwind_penalty(space, transport.zeta),
                                           dense_upwind_penalty(mesh, transport.zeta)))
        for sigma in (0.0, 5.0):
            worst = max(worst, _matrix_gap(assemble_dwdg_diffusion(space, PenaltyPolicy.constant(sigma)),
                                           dense_dwdg(mesh, sigma)))
        self.report.add(f"dense-oracle[{tag}]", worst, ORACLE_TOLERANCE)

    def check_paths(self, space: DGSpace, transport: Transport, tag: str) -> None:
        calculus = assemble_convection_reaction(space, transport.zeta, transport.div_zeta, transport.gamma,
                                                "calculus")
        centered = assemble_convection_reaction(space, transport.zeta, transport.div_zeta, transport.gamma,
                                                "centered-flux")
        gap = abs(calculus - centered).max() / abs(centered).max()
        self.report.add(f"path-equivalence[{tag}]", float(gap), IDENTITY_TOLERANCE)

    def check_affine_exactness(self, n: int) -> None:
        zeta = constant_vector(1.0, 0.5)
        problem = manufactured(
            "affine", lambda x, y: 1.0 + 2.0 * x - 3.0 * y,
            lambda x, y: (np.full(np.shape(x), 2.0), np.full(np.shape(x), -3.0)),
            constant_scalar(0.0), zeta=zeta, div_zeta=constant_scalar(0.0), gamma=constant_scalar(2.0),
            eps=0.0, domain=UNIT_SQUARE)
        mesh = _unit_mesh(n)
        result = solve_problem(problem, settings=self.settings, mesh=mesh, compute_errors=False)
        expected = DGFunction.from_vertex_values(mesh, problem.exact(mesh.vertices[:, 0], mesh.vertices[:, 1]))
        gap = np.abs(result.solution.coefficients - expected.coefficients).max() / np.abs(expected.coefficients).max()
        self.report.add(f"affine-exactness[h=1/{n}]", float(gap), AFFINE_TOLERANCE)

    def check_zero_penalty_solves(self, n: int) -> None:
        settings = self.settings.with_overrides(mesh_rule=DiagonalRule.CORNER_SAFE.value)
        for name in example_names():
            problem = get_example(name)
            result = solve_problem(problem, h=problem.domain.width / n, penalty=PenaltyPolicy.zero(),
                                   settings=settings, compute_errors=False)
            finite = bool(np.all(np.isfinite(result.solution.coefficients)))
            self.report.add(f"zero-penalty-solve[{name},h=1/{n}]", result.report.relative_residual,
                            self.settings.iterative_tolerance,
                            passed=finite and result.report.relative_residual <= self.settings.iterative_tolerance)

    def check_infsup(self) -> None:
        elliptic = ProblemSpec(
            name="symmetric-coercive", domain=UNIT_SQUARE, eps=1.0,
            zeta=constant_vector(0.0, 0.0), div_zeta=constant_scalar(0.0), gamma=constant_scalar(1.0),
            f=constant_scalar(1.0), g=constant_scalar(0.0))
        estimate = estimate_infsup(_unit_mesh(4), elliptic, max_dofs=self.settings.infsup_max_dofs)
        self.report.add("infsup-symmetric[h=1/4]", estimate.value, 0.5, passed=estimate.value >= 0.5)

        problem = get_example("boundary-layer")
        previous = None
        for n in _levels(self.scale):
            estimate = estimate_infsup(_unit_mesh(n), problem, path=self.settings.path,
                                       max_dofs=self.settings.infsup_max_dofs)
            ratio = 1.0 if previous is None else estimate.value / previous
            self.report.add(f"infsup-sweep[boundary-layer,h=1/{n}]", ratio, INFSUP_LEVEL_RATIO,
                            passed=estimate.value > 0.0 and ratio >= INFSUP_LEVEL_RATIO,
                            detail=f"estimate {estimate.value:.4f}, probe ratio {estimate.probe_ratio:.4f}")
            previous = estimate.value

    def run(self) -> ValidationReport:
        start = time.perf_counter()
        self.logger.info(f"Running {self.scale} validation with seed {self.seed}")
        for n in _levels(self.scale):
            space = DGSpace(_unit_mesh(n), self.settings.assembly_degree)
            self._guarded(f"trace-selector[h=1/{n}]", lambda: self.check_trace_selectors(space, f"h=1/{n}"))
            self._guarded(f"dwdg[h=1/{n}]", lambda: self.check_dwdg(space, f"h=1/{n}"))
            for transport in TRANSPORTS:
                tag = f"h=1/{n},zeta={transport.label}"
                self._guarded(f"calculus[{tag}]", lambda: self.check_calculus_identities(space, transport, tag))
                self._guarded(f"coercivity[{tag}]", lambda: self.check_coercivity(space, transport, tag))
                self._guarded(f"paths[{tag}]", lambda: self.check_paths(space, transport, tag))
        for rule in DiagonalRule:
            self._guarded(f"dense-oracle[{rule.value}]", lambda: self.check_dense_oracle(4, rule))
        self._guarded("affine-exactness", lambda: self.check_affine_exactness(8))
        self._guarded("zero-penalty-solve", lambda: self.check_zero_penalty_solves(_levels(self.scale)[-1]))
        if self.scale == "full":
            self._guarded("infsup", self.check_infsup)

        self.report.elapsed = time.perf_counter() - start
        for failure in self.report.failures():
            self.logger.error(f"FAILED {failure.name}: {failure.value:.3e} > {failure.tolerance:.1e}")
        self.logger.info(f"Validation {'passed' if self.report.passed else 'failed'}: "
                         f"{len(self.report.results)} properties in {self.report.elapsed:.1f}s")
        return self.report


def run_validate(scale: str = "quick", seed: int = 20240917,
                 settings: Optional[SolverSettings] = None) -> ValidationReport:
    return ValidationSuite(scale, seed, settings=settings).run()
