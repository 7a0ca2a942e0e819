import logging
from typing import Optional, Union

import numpy as np

from src.models.errors import GeometryError, InvalidArgumentError, TopologyError
from src.models.mesh import DiagonalRule, Mesh, MeshReport, Rectangle

logger = logging.getLogger("MeshBuilder")


def generate_structured_rect(domain: Rectangle, nx: int, ny: int,
                             diagonal: Union[DiagonalRule, str] = DiagonalRule.UNIFORM_NE) -> Mesh:
    """Split an nx-by-ny grid of cells into two triangles each"""
    if int(nx) != nx or int(ny) != ny or nx < 2 or ny < 2:
        raise InvalidArgumentError(f"Structured mesh needs nx, ny >= 2 (got nx={nx}, ny={ny})")
    if domain.area <= 0:
        raise InvalidArgumentError(f"Domain {domain.as_tuple()} has no area")
    rule = DiagonalRule(diagonal)
    nx, ny = int(nx), int(ny)

    xs = np.linspace(domain.x0, domain.x1, nx + 1)
    ys = np.linspace(domain.y0, domain.y1, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    v00 = j * (nx + 1) + i
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1

    flip = np.zeros(i.shape, dtype=bool)
    if rule is DiagonalRule.CORNER_SAFE:
        # The NE split leaves two boundary legs on one triangle only in these two corners
        flip = ((i == nx - 1) & (j == 0)) | ((i == 0) & (j == ny - 1))

    first = np.where(flip[:, None], np.column_stack([v00, v10, v01]), np.column_stack([v00, v10, v11]))
    second = np.where(flip[:, None], np.column_stack([v10, v11, v01]), np.column_stack([v00, v11, v01]))
    triangles = np.empty((2 * i.size, 3), dtype=np.int64)
    triangles[0::2] = first
    triangles[1::2] = second

    mesh = build_mesh(vertices, triangles, domain=domain, spacing=domain.width / nx)
    logger.debug(f"Generated {rule.value} mesh {nx}x{ny}: {mesh.num_triangles} triangles, {mesh.num_edges} edges")
    return mesh


def _signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))


def _barycentric_coefficients(vertices: np.ndarray, triangles: np.ndarray, areas: np.ndarray) -> np.ndarray:
    """lambda_k(x, y) = C[t, k, 0] + C[t, k, 1] x + C[t, k, 2] y"""
    coeffs = np.empty((triangles.shape[0], 3, 3))
    for k in range(3):
        pj = vertices[triangles[:, (k + 1) % 3]]
        pk = vertices[triangles[:, (k + 2) % 3]]
        coeffs[:, k, 0] = pj[:, 0] * pk[:, 1] - pk[:, 0] * pj[:, 1]
        coeffs[:, k, 1] = pj[:, 1] - pk[:, 1]
        coeffs[:, k, 2] = pk[:, 0] - pj[:, 0]
    return coeffs / (2.0 * areas)[:, None, None]


def build_mesh(vertices: np.ndarray, triangles: np.ndarray, domain: Optional[Rectangle] = None,
               spacing: Optional[float] = None) -> Mesh:
    """Orient triangles counter-clockwise and derive the full edge topology"""
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.array(triangles, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise InvalidArgumentError(f"Vertices must have shape (n, 2), got {vertices.shape}")
    if triangles.ndim != 2 or triangles.shape[1] != 3 or triangles.shape[0] == 0:
        raise InvalidArgumentError(f"Triangles must have shape (m, 3), got {triangles.shape}")
    if triangles.min() < 0 or triangles.max() >= vertices.shape[0]:
        bad = int(np.argmax((triangles < 0).any(axis=1) | (triangles >= vertices.shape[0]).any(axis=1)))
        raise TopologyError("Triangle references a missing vertex", bad)

    signed = _signed_areas(vertices, triangles)
    scale = np.ptp(vertices, axis=0).max() ** 2
    degenerate = np.abs(signed) <= 1e-14 * scale
    if degenerate.any():
        raise GeometryError("Degenerate triangle with zero area", int(np.argmax(degenerate)))
    clockwise = signed < 0
    triangles[clockwise] = triangles[clockwise][:, [0, 2, 1]]
    areas = np.abs(signed)

    nt = triangles.shape[0]
    nv = vertices.shape[0]
    tri_of = np.repeat(np.arange(nt), 3)
    local_of = np.tile(np.arange(3), nt)
    start = triangles.ravel()
    end = triangles[:, [1, 2, 0]].ravel()
    keys = np.minimum(start, end) * nv + np.maximum(start, end)

    unique_keys, edge_of, counts = np.unique(keys, return_inverse=True, return_counts=True)
    if (counts > 2).any():
        bad = int(np.argmax(counts > 2))
        raise TopologyError("Edge shared by more than two triangles", bad)
    ne = unique_keys.size

    # Within each edge, occurrences sorted by triangle: the last one is the plus side
    order = np.lexsort((tri_of, edge_of))
    sorted_edges = edge_of[order]
    last = np.ones(order.size, dtype=bool)
    last[:-1] = sorted_edges[1:] != sorted_edges[:-1]
    plus_occ = order[last]
    first = np.ones(order.size, dtype=bool)
    first[1:] = sorted_edges[1:] != sorted_edges[:-1]
    minus_occ = order[first]

    boundary = counts == 1
    edge_plus = tri_of[plus_occ]
    edge_plus_local = local_of[plus_occ]
    edge_minus = np.where(boundary, -1, tri_of[minus_occ])
    edge_minus_local = np.where(boundary, -1, local_of[minus_occ])
    edge_vertices = np.column_stack([start[plus_occ], end[plus_occ]])

    mismatched = (~boundary) & (start[minus_occ] != end[plus_occ])
    if mismatched.any():
        raise TopologyError("Adjacent triangles traverse a shared edge in the same direction",
                            int(np.argmax(mismatched)))

    delta = vertices[edge_vertices[:, 1]] - vertices[edge_vertices[:, 0]]
    lengths = np.hypot(delta[:, 0], delta[:, 1])
    normals = np.column_stack([delta[:, 1], -delta[:, 0]]) / lengths[:, None]

    triangle_edges = edge_of.reshape(nt, 3).astype(np.int64)
    diameters = lengths[triangle_edges].max(axis=1)

    if domain is None:
        lo = vertices.min(axis=0)
        hi = vertices.max(axis=0)
        domain = Rectangle(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

    return Mesh(
        vertices=vertices,
        triangles=triangles,
        edge_vertices=edge_vertices,
        edge_plus=edge_plus,
        edge_minus=edge_minus,
        edge_plus_local=edge_plus_local,
        edge_minus_local=edge_minus_local,
        normals=normals,
        edge_lengths=lengths,
        boundary=boundary,
        areas=areas,
        diameters=diameters,
        barycentric=_barycentric_coefficients(vertices, triangles, areas),
        triangle_edges=triangle_edges,
        domain=domain,
        spacing=spacing,
    )


def double_boundary_elements(mesh: Mesh) -> np.ndarray:
    return np.flatnonzero(mesh.boundary[mesh.triangle_edges].sum(axis=1) > 1)


def quasi_uniformity_ratio(mesh: Mesh) -> float:
    interior = mesh.interior
    if not interior.any():
        return 1.0
    dp = mesh.diameters[mesh.edge_plus[interior]]
    dm = mesh.diameters[mesh.edge_minus[interior]]
    return float(np.maximum(dp / dm, dm / dp).max())


def validate_mesh(mesh: Mesh, sigma_zero: bool = False, quasi_uniformity_limit: float = 4.0) -> MeshReport:
    """Check topology and geometry, then summarize element sizes"""
    bad = np.flatnonzero(mesh.areas <= 0)
    if bad.size:
        raise GeometryError("Non-positive element area", int(bad[0]))
    if (_signed_areas(mesh.vertices, mesh.triangles) <= 0).any():
        raise TopologyError("Triangle is not counter-clockwise",
                            int(np.argmax(_signed_areas(mesh.vertices, mesh.triangles) <= 0)))

    interior = mesh.interior
    dangling = interior & (mesh.edge_minus < 0)
    dangling |= (~interior) & (mesh.edge_minus >= 0)
    if dangling.any():
        raise TopologyError("Edge neighbour record disagrees with its boundary flag", int(np.argmax(dangling)))
    misordered = interior & (mesh.edge_plus <= mesh.edge_minus)
    if misordered.any():
        raise TopologyError("Plus side must carry the larger triangle index", int(np.argmax(misordered)))

    for side_tri, side_local in ((mesh.edge_plus, mesh.edge_plus_local),
                                 (mesh.edge_minus, mesh.edge_minus_local)):
        present = side_tri >= 0
        recorded = mesh.triangle_edges[side_tri[present], side_local[present]]
        wrong = recorded != np.flatnonzero(present)
        if wrong.any():
            raise TopologyError("Dangling edge reference", int(np.flatnonzero(present)[np.argmax(wrong)]))

    centroids = mesh.centroids
    midpoints = mesh.vertices[mesh.edge_vertices].mean(axis=1)
    outward = np.einsum("ij,ij->i", mesh.normals, midpoints - centroids[mesh.edge_plus])
    if (outward <= 0).any():
        raise TopologyError("Normal does not point out of the plus triangle", int(np.argmax(outward <= 0)))
    across = np.einsum("ij,ij->i", mesh.normals[interior],
                       centroids[mesh.edge_minus[interior]] - centroids[mesh.edge_plus[interior]])
    if (across <= 0).any():
        raise TopologyError("Normal mismatch between plus and minus triangles",
                            int(np.flatnonzero(interior)[np.argmax(across <= 0)]))

    delta = mesh.vertices[mesh.edge_vertices[:, 1]] - mesh.vertices[mesh.edge_vertices[:, 0]]
    length_error = np.abs(np.hypot(delta[:, 0], delta[:, 1]) - mesh.edge_lengths)
    if (length_error > 1e-14 * np.maximum(mesh.edge_lengths, 1.0)).any():
        raise TopologyError("Stored edge length disagrees with vertex distance", int(np.argmax(length_error)))

    doubles = double_boundary_elements(mesh)
    ratio = quasi_uniformity_ratio(mesh)
    report = MeshReport(
        h=float(mesh.diameters.max()),
        min_diameter=float(mesh.diameters.min()),
        max_diameter=float(mesh.diameters.max()),
        double_boundary_count=int(doubles.size),
        quasi_uniformity=ratio,
        double_boundary_elements=[int(t) for t in doubles],
        quasi_uniform=ratio <= quasi_uniformity_limit,
        sigma_zero_warning=bool(sigma_zero and doubles.size > 0),
    )
    if not report.quasi_uniform:
        logger.warning(f"Quasi-uniformity ratio {ratio:.2f} exceeds {quasi_uniformity_limit}")
    if report.sigma_zero_warning:
        logger.warning(f"sigma_e = 0 requested but {doubles.size} elements have two boundary edges; "
                       f"use the corner-safe diagonal rule")
    return report


def subdomain_mask(mesh: Mesh, box: Rectangle) -> np.ndarray:
    """True for triangles whose three vertices lie in the closed box"""
    pts = mesh.vertices[mesh.triangles]
    inside = box.contains(pts[..., 0], pts[..., 1])
    return inside.all(axis=1)


def structured_counts(domain: Rectangle, h: float) -> tuple:
    """Cell counts for a target grid spacing"""
    if h <= 0:
        raise InvalidArgumentError(f"Grid spacing must be positive, got {h}")
    return max(2, int(round(domain.width / h))), max(2, int(round(domain.height / h)))
