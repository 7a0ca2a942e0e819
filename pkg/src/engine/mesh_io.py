import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from src.engine.mesh_builder import build_mesh
from src.models.errors import InvalidArgumentError
from src.models.mesh import Mesh

logger = logging.getLogger("MeshIO")

PathLike = Union[str, Path]


def _base(path: PathLike) -> Path:
    path = Path(path)
    if path.suffix in (".node", ".ele"):
        return path.with_suffix("")
    return path


def _records(path: Path) -> List[Tuple[int, List[str]]]:
    records = []
    with open(path, "r") as fh:
        for number, line in enumerate(fh, start=1):
            content = line.split("#", 1)[0].strip()
            if content:
                records.append((number, content.split()))
    if not records:
        raise InvalidArgumentError(f"{path}: empty mesh file")
    return records


def _parse_int(path: Path, number: int, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise InvalidArgumentError(f"{path}:{number}: expected an integer, got '{text}'")


def _parse_float(path: Path, number: int, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise InvalidArgumentError(f"{path}:{number}: expected a number, got '{text}'")


def read_triangle_mesh(path: PathLike) -> Mesh:
    """Read a base.node / base.ele pair; indices may start at 0 or 1"""
    base = _base(path)
    node_path = base.with_suffix(".node")
    ele_path = base.with_suffix(".ele")

    node_records = _records(node_path)
    number, header = node_records[0]
    count = _parse_int(node_path, number, header[0])
    if len(header) > 1 and _parse_int(node_path, number, header[1]) != 2:
        raise InvalidArgumentError(f"{node_path}:{number}: only two-dimensional meshes are supported")
    if len(node_records) - 1 < count:
        raise InvalidArgumentError(f"{node_path}: header promises {count} nodes, found {len(node_records) - 1}")
    ids = np.empty(count, dtype=np.int64)
    vertices = np.empty((count, 2))
    for k, (number, parts) in enumerate(node_records[1:count + 1]):
        if len(parts) < 3:
            raise InvalidArgumentError(f"{node_path}:{number}: node line needs index, x and y")
        ids[k] = _parse_int(node_path, number, parts[0])
        vertices[k] = (_parse_float(node_path, number, parts[1]), _parse_float(node_path, number, parts[2]))
    first_index = int(ids.min())
    if not np.array_equal(np.sort(ids), np.arange(first_index, first_index + count)):
        raise InvalidArgumentError(f"{node_path}: node indices are not consecutive")
    order = np.argsort(ids)
    vertices = vertices[order]

    ele_records = _records(ele_path)
    number, header = ele_records[0]
    tcount = _parse_int(ele_path, number, header[0])
    if len(header) > 1 and _parse_int(ele_path, number, header[1]) != 3:
        raise InvalidArgumentError(f"{ele_path}:{number}: only linear triangles are supported")
    if len(ele_records) - 1 < tcount:
        raise InvalidArgumentError(f"{ele_path}: header promises {tcount} triangles, found {len(ele_records) - 1}")
    triangles = np.empty((tcount, 3), dtype=np.int64)
    for k, (number, parts) in enumerate(ele_records[1:tcount + 1]):
        if len(parts) < 4:
            raise InvalidArgumentError(f"{ele_path}:{number}: triangle line needs index and three nodes")
        triangles[k] = [_parse_int(ele_path, number, p) - first_index for p in parts[1:4]]

    mesh = build_mesh(vertices, triangles)
    logger.info(f"Read {mesh.num_triangles} triangles and {mesh.num_vertices} nodes from {base}")
    return mesh


def write_triangle_mesh(mesh: Mesh, path: PathLike) -> Tuple[Path, Path]:
    base = _base(path)
    base.parent.mkdir(parents=True, exist_ok=True)
    node_path = base.with_suffix(".node")
    ele_path = base.with_suffix(".ele")
    with open(node_path, "w") as fh:
        fh.write(f"{mesh.num_vertices} 2 0 0\n")
        for k, (x, y) in enumerate(mesh.vertices, start=1):
            fh.write(f"{k} {float(x)!r} {float(y)!r}\n")
    with open(ele_path, "w") as fh:
        fh.write(f"{mesh.num_triangles} 3 0\n")
        for k, tri in enumerate(mesh.triangles + 1, start=1):
            fh.write(f"{k} {tri[0]} {tri[1]} {tri[2]}\n")
    return node_path, ele_path
