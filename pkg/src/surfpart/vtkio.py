"""Legacy VTK ASCII readers and writers.

Triangle meshes with nodal/cell scalars are written as UNSTRUCTURED_GRID,
boundary polylines as POLYDATA lines. Snapshot files double as the restart
format: the title line carries the flow parameters and the surface tag.
"""
from __future__ import annotations

import numpy as np

from . import geometry as geo
from .mesh import TriangulatedSurface

_HEADER = "# vtk DataFile Version 3.0"


class VtkParseError(ValueError):
    def __init__(self, message, line_number):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


def _fmt(x):
    return format(float(x), ".17g")


def write_unstructured(path, points, triangles, point_data=None, cell_data=None,
                       title="surfpart mesh"):
    points = np.asarray(points, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    lines = [_HEADER, title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {len(points)} double")
    for p in points:
        lines.append(" ".join(_fmt(c) for c in p))
    lines.append(f"CELLS {len(triangles)} {4 * len(triangles)}")
    for t in triangles:
        lines.append(f"3 {t[0]} {t[1]} {t[2]}")
    lines.append(f"CELL_TYPES {len(triangles)}")
    lines.extend(["5"] * len(triangles))
    if point_data:
        lines.append(f"POINT_DATA {len(points)}")
        for name, values in point_data.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(_fmt(v) for v in np.asarray(values, dtype=float))
    if cell_data:
        lines.append(f"CELL_DATA {len(triangles)}")
        for name, values in cell_data.items():
            lines.append(f"SCALARS {name} int 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(str(int(v)) for v in values)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_polylines(path, polylines, scalars=None, scalar_name="kappa_g",
                    title="surfpart boundary curves"):
    """Polylines as POLYDATA LINES with optional per-point scalars."""
    all_points, connectivity = [], []
    offset = 0
    for poly in polylines:
        pts = np.asarray(poly.points if hasattr(poly, "points") else poly)
        ids = list(range(offset, offset + len(pts)))
        if getattr(poly, "closed", False):
            ids.append(offset)
        all_points.append(pts)
        connectivity.append(ids)
        offset += len(pts)
    points = np.vstack(all_points) if all_points else np.zeros((0, 3))
    lines = [_HEADER, title, "ASCII", "DATASET POLYDATA"]
    lines.append(f"POINTS {len(points)} double")
    for p in points:
        lines.append(" ".join(_fmt(c) for c in p))
    size = sum(len(ids) + 1 for ids in connectivity)
    lines.append(f"LINES {len(connectivity)} {size}")
    for ids in connectivity:
        lines.append(" ".join([str(len(ids))] + [str(i) for i in ids]))
    if scalars is not None:
        lines.append(f"POINT_DATA {len(points)}")
        lines.append(f"SCALARS {scalar_name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_fmt(v) for v in np.asarray(scalars, dtype=float))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_unstructured(path):
    """Parse a legacy VTK ASCII triangle file.

    Accepts UNSTRUCTURED_GRID with VTK_TRIANGLE cells or POLYDATA with
    POLYGONS of size 3. Returns (points, triangles, point_data, cell_data,
    title).
    """
    with open(path) as fh:
        raw = fh.read().splitlines()
    tokens = []  # (line_number, token stream per line)
    for ln, line in enumerate(raw, start=1):
        tokens.append((ln, line))

    pos = 0

    def next_line(expect=None):
        nonlocal pos
        while pos < len(tokens) and not tokens[pos][1].strip():
            pos += 1
        if pos >= len(tokens):
            raise VtkParseError("unexpected end of file", len(raw))
        ln, line = tokens[pos]
        pos += 1
        if expect and not line.strip().upper().startswith(expect):
            raise VtkParseError(f"expected {expect!r}, got {line.strip()!r}", ln)
        return ln, line.strip()

    next_line(expect="# VTK DATAFILE")
    _, title = next_line()
    ln, fmt = next_line()
    if fmt.upper() != "ASCII":
        raise VtkParseError("only ASCII files are supported", ln)
    ln, dataset = next_line(expect="DATASET")
    kind = dataset.split()[1].upper()
    if kind not in ("UNSTRUCTURED_GRID", "POLYDATA"):
        raise VtkParseError(f"unsupported dataset {kind}", ln)

    def read_numbers(count, ln_start):
        vals = []
        while len(vals) < count:
            ln, line = next_line()
            vals.extend(line.split())
        if len(vals) != count:
            raise VtkParseError("malformed number block", ln)
        return vals

    ln, points_header = next_line(expect="POINTS")
    n_points = int(points_header.split()[1])
    coords = read_numbers(3 * n_points, ln)
    try:
        points = np.array(coords, dtype=float).reshape(n_points, 3)
    except ValueError:
        raise VtkParseError("non-numeric point coordinate", ln) from None

    ln, cells_header = next_line()
    head = cells_header.split()[0].upper()
    if head not in ("CELLS", "POLYGONS"):
        raise VtkParseError(f"expected CELLS or POLYGONS, got {head}", ln)
    n_cells = int(cells_header.split()[1])
    total = int(cells_header.split()[2])
    flat = read_numbers(total, ln)
    triangles = []
    i = 0
    for _ in range(n_cells):
        size = int(flat[i])
        if size != 3:
            raise VtkParseError(f"cell with {size} vertices is not a triangle", ln)
        triangles.append([int(flat[i + 1]), int(flat[i + 2]), int(flat[i + 3])])
        i += 4
    triangles = np.array(triangles, dtype=np.int64)
    if head == "CELLS":
        ln, types_header = next_line(expect="CELL_TYPES")
        types = read_numbers(n_cells, ln)
        if any(t != "5" for t in types):
            raise VtkParseError("non-triangle cell type", ln)

    point_data, cell_data = {}, {}
    target, count = None, 0
    while pos < len(tokens):
        try:
            ln, line = next_line()
        except VtkParseError:
            break
        word = line.split()[0].upper()
        if word == "POINT_DATA":
            target, count = point_data, int(line.split()[1])
        elif word == "CELL_DATA":
            target, count = cell_data, int(line.split()[1])
        elif word == "SCALARS":
            name = line.split()[1]
            next_line(expect="LOOKUP_TABLE")
            vals = read_numbers(count, ln)
            if target is None:
                raise VtkParseError("SCALARS before POINT_DATA/CELL_DATA", ln)
            target[name] = np.array(vals, dtype=float)
        else:
            raise VtkParseError(f"unsupported section {word}", ln)
    return points, triangles, point_data, cell_data, title


# -- snapshot (restart) format ------------------------------------------------

def surface_tag(geometry):
    if isinstance(geometry, geo.Sphere):
        return f"sphere:{_fmt(geometry.radius)}"
    if isinstance(geometry, geo.Torus):
        return f"torus:{_fmt(geometry.major_radius)}:{_fmt(geometry.minor_radius)}"
    if isinstance(geometry, geo.PlanarDisk):
        return f"disk:{_fmt(geometry.radius)}:{_fmt(geometry.sector_angle)}"
    if isinstance(geometry, geo.ImplicitSurface):
        return "dziuk"
    raise ValueError(f"unknown geometry {geometry!r}")


def geometry_from_tag(tag):
    parts = tag.split(":")
    if parts[0] == "sphere":
        return geo.Sphere(float(parts[1]))
    if parts[0] == "torus":
        return geo.Torus(float(parts[1]), float(parts[2]))
    if parts[0] == "disk":
        return geo.PlanarDisk(float(parts[1]), float(parts[2]))
    if parts[0] == "dziuk":
        return geo.dziuk_surface()
    raise ValueError(f"unknown surface tag {tag!r}")


def write_snapshot(path, ensemble):
    title = (
        f"surfpart snapshot eps={_fmt(ensemble.epsilon)} "
        f"tau={_fmt(ensemble.tau)} m={ensemble.m} step={ensemble.step} "
        f"surface={surface_tag(ensemble.mesh.geometry)}"
    )
    point_data = {
        f"u_{i + 1}": ensemble.values[:, i] for i in range(ensemble.m)
    }
    write_unstructured(path, ensemble.mesh.vertices, ensemble.mesh.triangles,
                       point_data=point_data, title=title)


def read_snapshot(path):
    from .segregation import ComponentEnsemble

    points, triangles, point_data, _, title = read_unstructured(path)
    meta = {}
    for tok in title.split():
        if "=" in tok:
            key, val = tok.split("=", 1)
            meta[key] = val
    try:
        m = int(meta["m"])
        epsilon = float(meta["eps"])
        tau = float(meta["tau"])
        step = int(meta.get("step", 0))
        geometry = geometry_from_tag(meta["surface"])
    except KeyError as exc:
        raise VtkParseError(f"snapshot title missing {exc}", 2) from None
    mesh = TriangulatedSurface(points, triangles, geometry)
    values = np.column_stack([point_data[f"u_{i + 1}"] for i in range(m)])
    ensemble = ComponentEnsemble(values, epsilon, tau, mesh, step=step)
    return ensemble
