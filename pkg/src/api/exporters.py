"""File formats written by the command-line front-end.

Data files (CSV, VTK, Matrix Market) hold no timings so identical runs give
identical bytes; timings and solver statistics go to ``report.json``.
"""
import csv
import json
import logging
import re
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.io
import scipy.sparse as sp

from src.models.dg_function import DGFunction
from src.models.errors import InvalidArgumentError
from src.models.mesh import Mesh
from src.models.reports import NORM_LABELS, ConvergenceReport

PathLike = Union[str, Path]

VTK_TRIANGLE = 5
_PROFILE = re.compile(r"^\s*(x1|x2|x|y)\s*=\s*([-+0-9.eE]+)\s*$")

logger = logging.getLogger("Exporters")


def _number(value: float) -> str:
    return f"{float(value):.17g}"


def _prepare(path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_function_csv(function: DGFunction, path: PathLike) -> Path:
    """One row per dof: element, local vertex, vertex coordinates, coefficient"""
    path = _prepare(path)
    mesh = function.mesh
    corners = mesh.vertices[mesh.triangles]
    local = function.local
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["element", "local", "x", "y", "value"])
        for t in range(mesh.num_triangles):
            for k in range(3):
                writer.writerow([t, k, _number(corners[t, k, 0]), _number(corners[t, k, 1]),
                                 _number(local[t, k])])
    logger.info(f"Wrote {mesh.num_dofs} coefficients to {path}")
    return path


def write_vtk(mesh: Mesh, fields: Dict[str, DGFunction], path: PathLike, title: str = "dg solution") -> Path:
    """Legacy ASCII unstructured grid with three private points per triangle"""
    path = _prepare(path)
    nt = mesh.num_triangles
    points = mesh.vertices[mesh.triangles].reshape(-1, 2)
    lines = [
        "# vtk DataFile Version 2.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {3 * nt} double",
    ]
    lines.extend(f"{_number(x)} {_number(y)} 0" for x, y in points)
    lines.append(f"CELLS {nt} {4 * nt}")
    lines.extend(f"3 {3 * t} {3 * t + 1} {3 * t + 2}" for t in range(nt))
    lines.append(f"CELL_TYPES {nt}")
    lines.extend(str(VTK_TRIANGLE) for _ in range(nt))
    if fields:
        lines.append(f"POINT_DATA {3 * nt}")
        for name, function in fields.items():
            if function.mesh is not mesh:
                raise InvalidArgumentError(f"Field {name} lives on a different mesh")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(_number(value) for value in function.coefficients)
    lines.append(f"CELL_DATA {nt}")
    lines.append("SCALARS element int 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(str(t) for t in range(nt))
    path.write_text("\n".join(lines) + "\n")
    logger.info(f"Wrote VTK file {path}")
    return path


def write_linear_system(matrix: sp.spmatrix, rhs: np.ndarray, directory: PathLike,
                        stem: str = "system") -> Tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    matrix_path = directory / f"{stem}.mtx"
    rhs_path = directory / f"{stem}_rhs.txt"
    scipy.io.mmwrite(str(matrix_path), sp.coo_matrix(matrix), precision=17)
    np.savetxt(rhs_path, np.asarray(rhs, dtype=float), fmt="%.17e")
    logger.info(f"Wrote linear system to {matrix_path} and {rhs_path}")
    return matrix_path, rhs_path


def write_operator(matrix: sp.spmatrix, path: PathLike) -> Path:
    path = _prepare(path)
    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix), precision=17)
    return path


def parse_profile(text: str) -> Tuple[int, float]:
    """'x1=0' -> (0, 0.0); the axis names the fixed coordinate"""
    match = _PROFILE.match(text)
    if not match:
        raise InvalidArgumentError(f"Profile line must look like 'x1=0.5' or 'x2=0.25', got '{text}'")
    axis = 0 if match.group(1) in ("x", "x1") else 1
    try:
        return axis, float(match.group(2))
    except ValueError:
        raise InvalidArgumentError(f"Bad profile coordinate in '{text}'")


def _segment(corners: np.ndarray, axis: int, value: float, tol: float) -> Optional[Tuple[float, float, bool]]:
    """Range of the free coordinate where the line crosses one triangle"""
    other = 1 - axis
    offsets = corners[:, axis] - value
    hits = [corners[k, other] for k in range(3) if abs(offsets[k]) <= tol]
    on_edge = len(hits) >= 2
    for k in range(3):
        a, b = offsets[k], offsets[(k + 1) % 3]
        if (a < -tol and b > tol) or (a > tol and b < -tol):
            t = a / (a - b)
            hits.append(corners[k, other] + t * (corners[(k + 1) % 3, other] - corners[k, other]))
    if len(hits) < 2 or max(hits) - min(hits) <= tol:
        return None
    return min(hits), max(hits), on_edge


def extract_profile(function: DGFunction, line: Union[str, Tuple[int, float]],
                    tol: float = 1e-12) -> np.ndarray:
    """Samples of u_h along an axis-aligned line as rows (s, value, element).

    Every crossed element contributes its two end values, so a jump between
    neighbours shows up as two samples at the same s. Where the line runs
    along mesh edges only the elements on the upper side are used.
    """
    axis, value = parse_profile(line) if isinstance(line, str) else line
    mesh = function.mesh
    coeffs = mesh.barycentric
    local = function.local
    segments = []
    for t in range(mesh.num_triangles):
        found = _segment(mesh.vertices[mesh.triangles[t]], axis, value, tol)
        if found is not None:
            segments.append((found[0], found[1], found[2], t))
    if not segments:
        raise InvalidArgumentError(f"Profile line {'x1' if axis == 0 else 'x2'}={value:g} misses the mesh")

    upper = {t for _, _, on_edge, t in segments if on_edge and mesh.centroids[t, axis] > value}
    if upper:
        segments = [s for s in segments if not s[2] or s[3] in upper]
    segments.sort(key=lambda s: (s[0], s[1], s[3]))

    rows = []
    for start, stop, _, t in segments:
        for s in (start, stop):
            point = (value, s) if axis == 0 else (s, value)
            weights = coeffs[t, :, 0] + coeffs[t, :, 1] * point[0] + coeffs[t, :, 2] * point[1]
            rows.append((s, float(weights @ local[t]), t))
    return np.array(rows)


def write_profile_csv(profile: np.ndarray, path: PathLike, axis: int) -> Path:
    path = _prepare(path)
    coordinate = "x2" if axis == 0 else "x1"
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([coordinate, "value", "element"])
        for s, value, element in profile:
            writer.writerow([_number(s), _number(value), int(element)])
    return path


def _rate(rate: Optional[float]) -> str:
    return "---" if rate is None else f"{rate:.2f}"


def write_convergence_csv(report: ConvergenceReport, path: PathLike) -> Path:
    path = _prepare(path)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        header = ["h", "sigma"]
        for name in report.norms:
            header.extend([f"{name}_error", f"{name}_rate"])
        writer.writerow(header + ["saturated"])
        for row in report.rows:
            record = [_number(row.h), _number(row.sigma)]
            for name in report.norms:
                rate = row.rates.get(name)
                record.extend([_number(row.errors[name]), "" if rate is None else _number(rate)])
            writer.writerow(record + [int(row.saturated)])
    logger.info(f"Wrote {len(report.rows)} convergence rows to {path}")
    return path


def format_convergence_markdown(report: ConvergenceReport, norms: Optional[Sequence[str]] = None) -> str:
    """Aligned markdown table, one block of rows per sigma"""
    norms = list(norms or report.norms)
    header = ["sigma", "h"]
    for name in norms:
        header.extend([f"{NORM_LABELS[name]} error", "rate"])
    body: List[List[str]] = []
    for row in report.rows:
        cells = [f"{row.sigma:g}", f"1/{round(1 / row.h)}" if row.h > 0 else "0"]
        for name in norms:
            cells.extend([f"{row.errors[name]:.2e}", _rate(row.rates.get(name))])
        if row.saturated:
            cells[-1] += " (sat)"
        body.append(cells)

    widths = [max(len(line[i]) for line in [header] + body) for i in range(len(header))]

    def render(cells: Iterable[str]) -> str:
        return "| " + " | ".join(c.rjust(w) for c, w in zip(cells, widths)) + " |"

    lines = [f"### {report.example}, eps = {report.eps:g}", "", render(header),
             "|" + "|".join("-" * (w + 1) + ":" for w in widths) + "|"]
    lines.extend(render(cells) for cells in body)
    return "\n".join(lines) + "\n"


def write_text(text: str, path: PathLike) -> Path:
    path = _prepare(path)
    path.write_text(text)
    return path


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return _plain(value.item())
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def write_report_json(payload: Dict, path: PathLike) -> Path:
    path = _prepare(path)
    with open(path, "w") as handle:
        json.dump(_plain(payload), handle, indent=2, sort_keys=True)
        handle.write("\n")
    logger.info(f"Wrote report {path}")
    return path
