"""Dense reference implementations of the discrete operators.

Everything here is written element by element with its own basis
construction and quadrature so it can cross-check the sparse code paths
on small meshes.
"""
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from src.models.mesh import Mesh

_GAUSS_POINTS = 5


def _segment_rule() -> Tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(_GAUSS_POINTS)
    return 0.5 * (x + 1.0), 0.5 * w


def _collapsed_rule() -> Tuple[np.ndarray, np.ndarray]:
    """Conical product rule on the reference triangle"""
    s, ws = _segment_rule()
    xi, eta, weights = [], [], []
    for u, wu in zip(s, ws):
        for v, wv in zip(s, ws):
            xi.append(u)
            eta.append(v * (1.0 - u))
            weights.append(wu * wv * (1.0 - u))
    return np.column_stack([xi, eta]), np.array(weights)


def _basis_matrix(corners: np.ndarray) -> np.ndarray:
    """Column k holds the coefficients of the nodal function of corner k in [1, x, y]"""
    vandermonde = np.column_stack([np.ones(3), corners[:, 0], corners[:, 1]])
    return np.linalg.inv(vandermonde)


def _basis_values(coeffs: np.ndarray, x: float, y: float) -> np.ndarray:
    return np.array([1.0, x, y]) @ coeffs


def _element_points(mesh: Mesh, t: int):
    corners = mesh.vertices[mesh.triangles[t]]
    ref, ref_w = _collapsed_rule()
    e1 = corners[1] - corners[0]
    e2 = corners[2] - corners[0]
    jac = abs(e1[0] * e2[1] - e1[1] * e2[0])
    points = corners[0][None, :] + ref[:, :1] * e1[None, :] + ref[:, 1:] * e2[None, :]
    return points, ref_w * jac


def _edge_points(mesh: Mesh, e: int):
    a = mesh.vertices[mesh.edge_vertices[e, 0]]
    b = mesh.vertices[mesh.edge_vertices[e, 1]]
    s, w = _segment_rule()
    points = a[None, :] + s[:, None] * (b - a)[None, :]
    return points, w * np.linalg.norm(b - a)


def _trace_choice(mesh: Mesh, e: int, direction: int, side: str, tol: float = 1e-12) -> Tuple[float, float]:
    if mesh.boundary[e]:
        return 1.0, 0.0
    component = mesh.normals[e, direction]
    if abs(component) < tol:
        return 0.5, 0.5
    right_is_plus = component > 0
    if side == "+":
        return (1.0, 0.0) if right_is_plus else (0.0, 1.0)
    return (0.0, 1.0) if right_is_plus else (1.0, 0.0)


def dense_mass(mesh: Mesh) -> np.ndarray:
    n = mesh.num_dofs
    mass = np.zeros((n, n))
    for t in range(mesh.num_triangles):
        coeffs = _basis_matrix(mesh.vertices[mesh.triangles[t]])
        points, weights = _element_points(mesh, t)
        dofs = slice(3 * t, 3 * t + 3)
        for (x, y), w in zip(points, weights):
            phi = _basis_values(coeffs, x, y)
            mass[dofs, dofs] += w * np.outer(phi, phi)
    return mass


def _edge_bases(mesh: Mesh, e: int):
    plus = mesh.edge_plus[e]
    minus = mesh.edge_minus[e]
    cp = _basis_matrix(mesh.vertices[mesh.triangles[plus]])
    cm = None if minus < 0 else _basis_matrix(mesh.vertices[mesh.triangles[minus]])
    return plus, minus, cp, cm


def _accumulate_edge(form: np.ndarray, mesh: Mesh, e: int, weight_fn: Callable, alpha: float, beta: float):
    """form[test, trial] += int c (alpha v+ + beta v-) [phi]"""
    plus, minus, cp, cm = _edge_bases(mesh, e)
    points, weights = _edge_points(mesh, e)
    for (x, y), w in zip(points, weights):
        c = weight_fn(x, y)
        bp = _basis_values(cp, x, y)
        bm = np.zeros(3) if cm is None else _basis_values(cm, x, y)
        for a in range(3):
            for b in range(3):
                form[3 * plus + a, 3 * plus + b] += w * c * alpha * bp[a] * bp[b]
                if minus >= 0:
                    form[3 * plus + a, 3 * minus + b] += w * c * beta * bp[a] * bm[b]
                    form[3 * minus + a, 3 * plus + b] -= w * c * alpha * bm[a] * bp[b]
                    form[3 * minus + a, 3 * minus + b] -= w * c * beta * bm[a] * bm[b]


def dense_partial(mesh: Mesh, direction: int, side: str, mode: str = "natural",
                  g: Optional[Callable] = None) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Discrete partial as a dense matrix plus optional boundary load"""
    n = mesh.num_dofs
    form = np.zeros((n, n))
    for t in range(mesh.num_triangles):
        coeffs = _basis_matrix(mesh.vertices[mesh.triangles[t]])
        points, weights = _element_points(mesh, t)
        gradient = coeffs[1 + direction, :]
        for (x, y), w in zip(points, weights):
            phi = _basis_values(coeffs, x, y)
            for a in range(3):
                for b in range(3):
                    form[3 * t + a, 3 * t + b] -= w * phi[b] * gradient[a]

    load = np.zeros(n) if mode == "data" else None
    for e in range(mesh.num_edges):
        if mesh.boundary[e] and mode != "natural":
            if mode == "data":
                plus, _, cp, _ = _edge_bases(mesh, e)
                points, weights = _edge_points(mesh, e)
                for (x, y), w in zip(points, weights):
                    load[3 * plus:3 * plus + 3] += (w * float(g(x, y)) * mesh.normals[e, direction]
                                                    * _basis_values(cp, x, y))
            continue
        alpha, beta = _trace_choice(mesh, e, direction, side)
        normal = mesh.normals[e, direction]
        _accumulate_edge(form, mesh, e, lambda x, y: normal, alpha, beta)

    mass = dense_mass(mesh)
    matrix = np.linalg.solve(mass, form)
    return matrix, None if load is None else np.linalg.solve(mass, load)


def dense_div_zeta(mesh: Mesh, zeta: Callable, side: str = "avg") -> np.ndarray:
    n = mesh.num_dofs
    form = np.zeros((n, n))
    for t in range(mesh.num_triangles):
        coeffs = _basis_matrix(mesh.vertices[mesh.triangles[t]])
        points, weights = _element_points(mesh, t)
        for (x, y), w in zip(points, weights):
            z = np.array([float(c) for c in zeta(x, y)])
            phi = _basis_values(coeffs, x, y)
            for a in range(3):
                transport = z @ coeffs[1:, a]
                for b in range(3):
                    form[3 * t + a, 3 * t + b] -= w * transport * phi[b]

    for e in range(mesh.num_edges):
        for direction in (0, 1):
            if side == "avg":
                right = _trace_choice(mesh, e, direction, "+")
                left = _trace_choice(mesh, e, direction, "-")
                alpha, beta = 0.5 * (right[0] + left[0]), 0.5 * (right[1] + left[1])
            else:
                alpha, beta = _trace_choice(mesh, e, direction, side)
            normal = mesh.normals[e, direction]
            _accumulate_edge(form, mesh, e,
                             lambda x, y, d=direction: float(zeta(x, y)[d]) * normal, alpha, beta)
    return np.linalg.solve(dense_mass(mesh), form)


def dense_dwdg(mesh: Mesh, sigma: float) -> np.ndarray:
    """Diffusion form from dense zero-data gradients plus the jump penalty"""
    mass = dense_mass(mesh)
    n = mesh.num_dofs
    form = np.zeros((n, n))
    for side in ("+", "-"):
        for direction in (0, 1):
            gradient, _ = dense_partial(mesh, direction, side, "zero-data")
            form += 0.5 * gradient.T @ mass @ gradient
    for e in range(mesh.num_edges):
        penalty = sigma / mesh.edge_lengths[e]
        _accumulate_jump(form, mesh, e, lambda x, y: penalty)
    return form


def _accumulate_jump(form: np.ndarray, mesh: Mesh, e: int, weight_fn: Callable):
    plus, minus, cp, cm = _edge_bases(mesh, e)
    points, weights = _edge_points(mesh, e)
    for (x, y), w in zip(points, weights):
        c = weight_fn(x, y)
        local = [(plus, 1.0, _basis_values(cp, x, y))]
        if minus >= 0:
            local.append((minus, -1.0, _basis_values(cm, x, y)))
        for ta, sa, ba in local:
            for tb, sb, bb in local:
                form[3 * ta:3 * ta + 3, 3 * tb:3 * tb + 3] += w * c * sa * sb * np.outer(ba, bb)


def dense_upwind_penalty(mesh: Mesh, zeta: Callable) -> np.ndarray:
    n = mesh.num_dofs
    form = np.zeros((n, n))
    for e in np.flatnonzero(mesh.interior):
        normal = mesh.normals[e]
        _accumulate_jump(form, mesh, e,
                         lambda x, y: 0.5 * abs(float(np.dot([float(c) for c in zeta(x, y)], normal))))
    return form
