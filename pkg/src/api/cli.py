import argparse
import asyncio
import logging
import time
from dataclasses import asdict
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence

from config import SolverSettings
from src.api.exporters import (extract_profile, format_convergence_markdown, parse_profile,
                               write_convergence_csv, write_function_csv, write_linear_system,
                               write_operator, write_profile_csv, write_report_json, write_text,
                               write_vtk)
from src.engine.convergence import ConvergenceStudy
from src.engine.dg_calculus import build_div_zeta, build_partial
from src.engine.expressions import load_problem_config
from src.engine.inf_sup import estimate_infsup
from src.engine.mesh_builder import generate_structured_rect, structured_counts, validate_mesh
from src.engine.mesh_io import read_triangle_mesh, write_triangle_mesh
from src.engine.pipeline import SolveResult, build_mesh_for, solve_problem
from src.engine.problems import catalog, example_names, get_example
from src.engine.quadrature import supported_triangle_degrees
from src.engine.validation import SCALES, run_validate as run_validation_suite
from src.models.errors import InvalidArgumentError
from src.models.mesh import DiagonalRule, Mesh, Rectangle
from src.models.operators import AssemblyPath
from src.models.problem import PenaltyPolicy, ProblemSpec
from src.models.reports import NORM_NAMES, ConvergenceReport, ValidationReport

DEFAULT_SOLVE_H = 1.0 / 32.0
TABLE_NORMS = ("l2", "h", "h_sharp")

logger = logging.getLogger("CLI")


def parse_levels(text: str) -> List[float]:
    """'1/4,1/8,0.0625' -> [0.25, 0.125, 0.0625]"""
    levels = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            value = float(Fraction(item))
        except (ValueError, ZeroDivisionError):
            raise InvalidArgumentError(f"Bad mesh level '{item}'")
        if value <= 0:
            raise InvalidArgumentError(f"Mesh level must be positive, got {item}")
        levels.append(value)
    if not levels:
        raise InvalidArgumentError("No mesh levels given")
    return levels


def parse_sigmas(text: str) -> List[float]:
    try:
        sigmas = [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise InvalidArgumentError(f"Bad penalty list '{text}'")
    if not sigmas or min(sigmas) < 0:
        raise InvalidArgumentError(f"Penalty values must be non-negative, got '{text}'")
    return sigmas


def resolve_problem(example: Optional[str], config: Optional[str], eps: Optional[float]) -> ProblemSpec:
    if config:
        return load_problem_config(config, eps=eps)
    if not example:
        raise InvalidArgumentError(f"Give --example ({', '.join(example_names())}) or --config")
    return get_example(example, eps)


def default_solve_h(example: Optional[str]) -> float:
    """Spacing of a solve without --h: the figure resolution of a catalog example"""
    if example:
        return catalog()[example].figure_h
    return DEFAULT_SOLVE_H


def parse_rectangle(text: str) -> Rectangle:
    try:
        return Rectangle.parse(text)
    except ValueError as exc:
        raise InvalidArgumentError(f"Bad rectangle '{text}': {exc}")


def resolve_mask(text: Optional[str], example: Optional[str]) -> Optional[Rectangle]:
    if text is None or text == "none":
        return None
    if text == "preset":
        preset = catalog().get(example or "")
        if preset is None or preset.local_mask is None:
            raise InvalidArgumentError(f"Example '{example}' has no preset mask")
        return preset.local_mask
    return parse_rectangle(text)


def settings_from_args(args: argparse.Namespace) -> SolverSettings:
    for degree in (args.quad_assembly, args.quad_error):
        if degree is not None and degree not in supported_triangle_degrees():
            raise InvalidArgumentError(
                f"Quadrature degree {degree} unsupported; choose from {supported_triangle_degrees()}")
    return SolverSettings.from_env(
        assembly_degree=args.quad_assembly,
        error_degree=args.quad_error,
        mesh_rule=args.mesh_rule,
        solver_method=args.solver,
        path=args.path,
    )


def run_solve(problem: ProblemSpec, h: Optional[float], penalty: PenaltyPolicy, settings: SolverSettings,
              out_dir: Path, mesh: Optional[Mesh] = None, profile: Optional[str] = None,
              dump_system: bool = False, dump_operator: bool = False) -> SolveResult:
    """Single solve with CSV/VTK dumps, an optional profile and report.json"""
    start = time.perf_counter()
    result = solve_problem(problem, h=h, penalty=penalty, settings=settings, mesh=mesh)
    fields = {"u_h": result.solution}
    if problem.has_exact:
        fields["u"] = result.space.l2_project(problem.exact)
    write_function_csv(result.solution, out_dir / "solution.csv")
    write_vtk(result.mesh, fields, out_dir / "solution.vtk", title=f"{problem.name} eps={problem.eps:g}")

    if profile:
        axis, _ = parse_profile(profile)
        write_profile_csv(extract_profile(result.solution, profile), out_dir / "profile.csv", axis)
    if dump_system:
        write_linear_system(result.forms.total, result.forms.rhs, out_dir, "system")
    if dump_operator:
        for direction in (0, 1):
            for side, label in (("+", "plus"), ("-", "minus")):
                operator = build_partial(result.space, direction, side, sign_tolerance=settings.sign_tolerance)
                write_operator(operator.matrix, out_dir / f"partial_{label}_x{direction + 1}.mtx")
        write_operator(build_div_zeta(result.space, problem.zeta, "avg", settings.sign_tolerance).matrix,
                       out_dir / "div_zeta_avg.mtx")

    payload = {
        "command": "solve",
        "problem": problem.name,
        "eps": problem.eps,
        "sigma": penalty.label(),
        "h": result.h,
        "settings": asdict(settings),
        "mesh": result.mesh_report.to_dict(),
        "solver": result.report.to_dict(),
        "assembly_time": result.assembly_time,
        "consistency_defect": result.forms.consistency_defect(),
        "errors": None if result.errors is None else result.errors.as_dict(),
        "quadrature_saturated": None if result.errors is None else result.errors.quadrature_saturated,
        "elapsed": time.perf_counter() - start,
    }
    write_report_json(payload, out_dir / "report.json")
    if result.errors is not None:
        logger.info(f"L2 error {result.errors.l2:.3e}, h-norm error {result.errors.h:.3e}, "
                    f"h#-norm error {result.errors.h_sharp:.3e}")
    return result


def run_convergence(problem: ProblemSpec, levels: Sequence[float], sigmas: Sequence[float],
                    mask: Optional[Rectangle], settings: SolverSettings, out_dir: Path,
                    norms: Sequence[str] = NORM_NAMES) -> ConvergenceReport:
    """One solve per (h, sigma); writes convergence.csv, convergence.md and report.json"""
    start = time.perf_counter()
    study = ConvergenceStudy(problem, levels, sigmas, mask, settings, norms)
    try:
        report = asyncio.run(study.run())
    finally:
        study.close()
    write_convergence_csv(report, out_dir / "convergence.csv")
    table = format_convergence_markdown(report, [n for n in TABLE_NORMS if n in report.norms] or None)
    write_text(table, out_dir / "convergence.md")
    print(table)
    write_report_json({
        "command": "convergence",
        "problem": problem.name,
        "eps": problem.eps,
        "metadata": report.metadata,
        "solves": [{"h": r.h, "sigma": r.penalty.label(), "solver": r.report.to_dict(),
                    "assembly_time": r.assembly_time} for r in study.results],
        "elapsed": time.perf_counter() - start,
    }, out_dir / "report.json")
    return report


def run_validate(scale: str, settings: SolverSettings, out_dir: Path) -> ValidationReport:
    report = run_validation_suite(scale, settings=settings)
    write_report_json(report.to_dict(), out_dir / "validation.json")
    for result in report.results:
        status = "ok  " if result.passed else "FAIL"
        print(f"{status} {result.name:<55s} {result.value:10.3e} (tol {result.tolerance:.1e})")
    print(f"{len(report.results) - len(report.failures())}/{len(report.results)} properties passed "
          f"in {report.elapsed:.1f}s")
    return report


def run_infsup(problem: ProblemSpec, levels: Sequence[float], penalty: PenaltyPolicy,
               settings: SolverSettings, out_dir: Path) -> List[dict]:
    rows = []
    for h in levels:
        mesh = build_mesh_for(problem, h, settings)
        estimate = estimate_infsup(mesh, problem, penalty, AssemblyPath(settings.path), settings.infsup_max_dofs)
        rows.append({"h": h, "dofs": estimate.dofs, "infsup": estimate.value, "probe_ratio": estimate.probe_ratio})
        print(f"h=1/{round(1 / h):<4d} dofs={estimate.dofs:<6d} inf-sup={estimate.value:.4f} "
              f"probe={estimate.probe_ratio:.4f}")
    write_report_json({"command": "infsup", "problem": problem.name, "eps": problem.eps,
                       "sigma": penalty.label(), "rows": rows}, out_dir / "infsup.json")
    return rows


def run_mesh(args: argparse.Namespace, settings: SolverSettings, out_dir: Path) -> Mesh:
    if args.mesh_file:
        mesh = read_triangle_mesh(args.mesh_file)
    else:
        domain = parse_rectangle(args.domain)
        nx, ny = structured_counts(domain, parse_levels(args.h)[0])
        mesh = generate_structured_rect(domain, nx, ny, settings.mesh_rule)
    report = validate_mesh(mesh, sigma_zero=args.sigma_zero, quasi_uniformity_limit=settings.quasi_uniformity_limit)
    for key, value in report.to_dict().items():
        print(f"{key:>24s}: {value}")
    print(f"{'triangles':>24s}: {mesh.num_triangles}")
    print(f"{'edges':>24s}: {mesh.num_edges} ({int(mesh.boundary.sum())} on the boundary)")
    if args.export:
        write_triangle_mesh(mesh, out_dir / args.export)
    write_report_json({"command": "mesh", "triangles": mesh.num_triangles, "edges": mesh.num_edges,
                       "mesh": report.to_dict()}, out_dir / "mesh.json")
    return mesh


class CommandLine:
    """Argument parsing and dispatch for the solve/convergence/validate/infsup/mesh commands"""

    def __init__(self):
        self.parser = self.build_parser()
        self.logger = logging.getLogger("CLI")

    @staticmethod
    def build_parser() -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--out", default="results", help="Output directory (default: results)")
        common.add_argument("--mesh-rule", choices=[r.value for r in DiagonalRule], default=None)
        common.add_argument("--quad-assembly", type=int, default=None, help="Assembly quadrature degree")
        common.add_argument("--quad-error", type=int, default=None, help="Error-norm quadrature degree")
        common.add_argument("--solver", choices=["direct", "iterative"], default=None)
        common.add_argument("--path", choices=[p.value for p in AssemblyPath], default=None,
                            help="Convection assembly path")
        common.add_argument("-v", "--verbose", action="store_true")

        problem = argparse.ArgumentParser(add_help=False)
        problem.add_argument("--example", choices=example_names())
        problem.add_argument("--config", help="JSON problem description")
        problem.add_argument("--eps", type=float, default=None, help="Override the diffusion coefficient")

        parser = argparse.ArgumentParser(
            prog="dgcdr",
            description="Dual-wind DG solver for convection-diffusion-reaction problems")
        commands = parser.add_subparsers(dest="command", required=True)

        solve = commands.add_parser("solve", parents=[common, problem], help="Solve one configuration")
        solve.add_argument("--h", default=None,
                           help="Grid spacing, e.g. 1/32 (default: an example's figure spacing)")
        solve.add_argument("--sigma", type=float, default=None, help="Jump penalty (default: problem's)")
        solve.add_argument("--mesh-file", help="Triangle .node/.ele base path instead of a structured mesh")
        solve.add_argument("--profile", help="Profile line such as x1=0")
        solve.add_argument("--dump-system", action="store_true", help="Write the matrix and rhs")
        solve.add_argument("--dump-operator", action="store_true", help="Write discrete derivative matrices")

        sweep = commands.add_parser("convergence", parents=[common, problem], help="Convergence study")
        sweep.add_argument("--levels", help="Comma separated h values (default: example preset)")
        sweep.add_argument("--sigma", default="0,5", help="Comma separated penalties (default: 0,5)")
        sweep.add_argument("--mask", help="x0,y0,x1,y1, 'preset' or 'none' (default: global norms)")
        sweep.add_argument("--max-level", default="1/64", help="Finest h allowed (default: 1/64)")
        sweep.add_argument("--norms", default=",".join(NORM_NAMES), help="Norms to report")

        validate = commands.add_parser("validate", parents=[common], help="Run the property suite")
        validate.add_argument("scale", nargs="?", choices=SCALES, default="quick")

        infsup = commands.add_parser("infsup", parents=[common, problem], help="Dense inf-sup estimates")
        infsup.add_argument("--levels", default="1/4,1/8,1/16")
        infsup.add_argument("--sigma", type=float, default=None)

        mesh = commands.add_parser("mesh", parents=[common], help="Mesh report and export")
        mesh.add_argument("--mesh-file", help="Triangle .node/.ele base path")
        mesh.add_argument("--domain", default="0,0,1,1", help="x0,y0,x1,y1 for a structured mesh")
        mesh.add_argument("--h", default="1/8")
        mesh.add_argument("--sigma-zero", action="store_true", help="Report elements that need sigma > 0")
        mesh.add_argument("--export", help="Write .node/.ele files with this base name")
        return parser

    def parse(self, argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
        return self.parser.parse_args(argv)

    def dispatch(self, args: argparse.Namespace) -> int:
        settings = settings_from_args(args)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)

        if args.command == "solve":
            problem = resolve_problem(args.example, args.config, args.eps)
            penalty = problem.penalty if args.sigma is None else PenaltyPolicy.constant(args.sigma)
            mesh = read_triangle_mesh(args.mesh_file) if args.mesh_file else None
            if mesh is not None:
                h = None
            else:
                h = parse_levels(args.h)[0] if args.h else default_solve_h(args.example)
            profile = args.profile
            if profile is None and args.example:
                profile = catalog()[args.example].profile
            run_solve(problem, h, penalty, settings, out_dir, mesh, profile, args.dump_system, args.dump_operator)
            return 0

        if args.command == "convergence":
            problem = resolve_problem(args.example, args.config, args.eps)
            if args.levels:
                levels = parse_levels(args.levels)
            elif args.example:
                levels = list(catalog()[args.example].levels)
            else:
                raise InvalidArgumentError("--levels is required with --config")
            finest = parse_levels(args.max_level)[0]
            kept = [h for h in levels if h >= finest * (1 - 1e-12)]
            if len(kept) < len(levels):
                self.logger.warning(f"Dropping levels finer than h={args.max_level}; raise --max-level to run them")
            norms = [n.strip() for n in args.norms.split(",") if n.strip()]
            report = run_convergence(problem, kept, parse_sigmas(args.sigma),
                                     resolve_mask(args.mask, args.example), settings, out_dir, norms)
            return 1 if report.metadata.get("failures") else 0

        if args.command == "validate":
            return 0 if run_validate(args.scale, settings, out_dir).passed else 1

        if args.command == "infsup":
            problem = resolve_problem(args.example, args.config, args.eps)
            penalty = problem.penalty if args.sigma is None else PenaltyPolicy.constant(args.sigma)
            run_infsup(problem, parse_levels(args.levels), penalty, settings, out_dir)
            return 0

        if args.command == "mesh":
            run_mesh(args, settings, out_dir)
            return 0
        raise InvalidArgumentError(f"Unknown command {args.command}")
