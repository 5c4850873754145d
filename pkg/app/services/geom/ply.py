"""ASCII PLY import/export for point clouds (vertex x, y, z and optional nx, ny, nz)."""

from pathlib import Path

import numpy as np

from app.services.geom.cloud import PointCloud
from app.utils.errors import InvalidArgumentError


def write_ply(path: str | Path, cloud: PointCloud, extra: dict[str, np.ndarray] | None = None) -> Path:
    """Write ``cloud`` as ASCII PLY; ``extra`` adds integer per-vertex properties."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    columns = [cloud.points]
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property double x",
        "property double y",
        "property double z",
    ]
    formats = ["%.17g"] * 3
    if cloud.normals is not None:
        columns.append(cloud.normals)
        header += ["property double nx", "property double ny", "property double nz"]
        formats += ["%.17g"] * 3
    for name, values in (extra or {}).items():
        values = np.asarray(values).reshape(-1, 1)
        if len(values) != len(cloud):
            raise InvalidArgumentError(f"extra property {name} does not match the vertex count")
        columns.append(values)
        header.append(f"property int {name}")
        formats.append("%d")
    header.append("end_header")

    with path.open("w", encoding="utf-8") as handle:
        handle.write("\n".join(header) + "\n")
        if len(cloud):
            np.savetxt(handle, np.hstack(columns), fmt=formats)
    return path


def read_ply_table(path: str | Path) -> dict[str, np.ndarray]:
    """Read all vertex properties of an ASCII PLY file as named columns."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        if handle.readline().strip() != "ply":
            raise InvalidArgumentError(f"{path} is not a PLY file")
        count = 0
        names: list[str] = []
        in_vertex = False
        for line in handle:
            tokens = line.split()
            if not tokens:
                continue
            if tokens[0] == "format" and tokens[1] != "ascii":
                raise InvalidArgumentError("only ASCII PLY is supported")
            if tokens[0] == "element":
                in_vertex = tokens[1] == "vertex"
                if in_vertex:
                    count = int(tokens[2])
            elif tokens[0] == "property" and in_vertex:
                names.append(tokens[-1])
            elif tokens[0] == "end_header":
                break
        data = np.loadtxt(handle, dtype=np.float64, max_rows=count, ndmin=2) if count else np.zeros((0, len(names)))

    if data.shape[1] < len(names):
        raise InvalidArgumentError(f"{path} has fewer columns than declared properties")
    return {name: data[:, i] for i, name in enumerate(names)}


def read_ply(path: str | Path) -> PointCloud:
    table = read_ply_table(path)
    if not {"x", "y", "z"} <= table.keys():
        raise InvalidArgumentError(f"{path} has no x/y/z vertex properties")
    points = np.column_stack([table["x"], table["y"], table["z"]])
    normals = None
    if {"nx", "ny", "nz"} <= table.keys():
        normals = np.column_stack([table["nx"], table["ny"], table["nz"]])
    return PointCloud(points, normals)
