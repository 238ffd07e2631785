"""Triangulated surfaces: generation, validation and uniform refinement."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, PlanarDisk, Sphere, Torus

_MAX_LEVEL = 10
_mesh_ids = itertools.count()


class MeshError(ValueError):
    """Mesh fails a structural invariant."""


@dataclass(frozen=True)
class ProlongationMap:
    """Field-transfer record produced by :func:`refine`.

    Child vertices ``0 .. n_parent - 1`` copy the parent vertex of the same
    index; vertex ``n_parent + k`` is the projected midpoint of parent edge
    ``edges[k]``.
    """

    parent_id: int
    child_id: int
    n_parent: int
    edges: np.ndarray


class TriangulatedSurface:
    """Piecewise-flat triangulation whose vertices lie on an exact geometry.

    Parameters
    ----------
    vertices : (n, 3) float array
    triangles : (t, 3) int array
        Consistently oriented vertex-index triples.
    geometry : Sphere | Torus | ImplicitSurface | PlanarDisk
    """

    def __init__(self, vertices, triangles, geometry, validate=True):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.geometry = geometry
        self.mesh_id = next(_mesh_ids)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError("vertices must be an (n, 3) array")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must be a (t, 3) array")
        if len(self.triangles) and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise MeshError("triangle index out of range")
        self._build_edges()
        if validate:
            self.validate()

    # -- structure ---------------------------------------------------------

    def _build_edges(self):
        t = self.triangles
        directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        self._directed_edges = directed
        edges, inverse, counts = np.unique(
            np.sort(directed, axis=1), axis=0, return_inverse=True, return_counts=True
        )
        self.edges = edges
        self.edge_counts = counts
        # edge index per triangle slot, blocks [v0v1, v1v2, v2v0]
        self._edge_of_slot = inverse.reshape(3, len(t))
        boundary = np.zeros(len(self.vertices), dtype=bool)
        boundary[edges[counts == 1].ravel()] = True
        self.boundary_vertex = boundary

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def is_closed(self):
        return not self.boundary_vertex.any()

    @property
    def h(self):
        """Maximal triangle diameter (longest edge length)."""
        d = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
        return float(np.max(np.linalg.norm(d, axis=1)))

    def triangle_areas(self):
        x = self.vertices[self.triangles]
        n = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
        return 0.5 * np.linalg.norm(n, axis=1)

    def area(self):
        return float(np.sum(self.triangle_areas()))

    def min_angle(self):
        """Smallest interior triangle angle in radians."""
        x = self.vertices[self.triangles]
        angles = []
        for i in range(3):
            a = x[:, (i + 1) % 3] - x[:, i]
            b = x[:, (i + 2) % 3] - x[:, i]
            cosang = np.einsum("ij,ij->i", a, b) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
            )
            angles.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
        return float(np.min(angles))

    def vertex_triangle_adjacency(self):
        """List of incident triangle indices per vertex."""
        adj = [[] for _ in range(self.n_vertices)]
        for ti, tri in enumerate(self.triangles):
            for v in tri:
                adj[v].append(ti)
        return adj

    def validate(self):
        if np.min(self.triangles) < 0 or np.max(self.triangles) >= self.n_vertices:
            raise MeshError("triangle index out of range")
        areas = self.triangle_areas()
        if np.any(areas <= 0) or np.any(areas < 1e-12 * np.median(areas)):
            raise MeshError(f"degenerate triangle {int(np.argmin(areas))}")
        if np.any(self.edge_counts > 2):
            raise MeshError("non-manifold edge (shared by more than 2 triangles)")
        if self.geometry.closed and np.any(self.edge_counts == 1):
            raise MeshError("closed geometry with boundary edges")
        # consistent orientation: each directed edge occurs at most once
        n_directed = len(np.unique(self._directed_edges, axis=0))
        if n_directed != len(self._directed_edges):
            raise MeshError("inconsistent triangle orientation")
        res = self.geometry.residual(self.vertices)
        tol = 1e-12 * self.geometry.diameter()
        if np.max(res) > tol:
            raise MeshError(
                f"vertex {int(np.argmax(res))} off the exact surface "
                f"(residual {np.max(res):.3e})"
            )


# -- generators -------------------------------------------------------------

_ICO_FACES = np.array(
    [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ],
    dtype=np.int64,
)


def _icosahedron_vertices():
    t = (1.0 + np.sqrt(5.0)) / 2.0
    return np.array(
        [
            (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
            (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
            (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
        ],
        dtype=float,
    )


def generate_icosphere(level, radius=1.0):
    """Icosahedron subdivided ``level`` times, vertices on the sphere.

    Yields 10 * 4**level + 2 vertices and 20 * 4**level triangles.
    """
    if level > _MAX_LEVEL:
        raise MeshError(f"refinement level {level} exceeds guard {_MAX_LEVEL}")
    geometry = Sphere(radius)
    mesh = TriangulatedSurface(
        geometry.project(_icosahedron_vertices()), _ICO_FACES, geometry
    )
    for _ in range(level):
        mesh, _ = refine(mesh)
    return mesh


def generate_torus(major_radius, minor_radius, n_major, n_minor):
    """Structured torus triangulation from an (n_major, n_minor) angle grid."""
    if n_major < 3 or n_minor < 3:
        raise MeshError("torus grid needs at least 3 segments per direction")
    geometry = Torus(major_radius, minor_radius)
    theta = 2.0 * np.pi * np.arange(n_major) / n_major
    phi = 2.0 * np.pi * np.arange(n_minor) / n_minor
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    ring = major_radius + minor_radius * np.cos(ph)
    vertices = np.stack(
        [ring * np.cos(th), ring * np.sin(th), minor_radius * np.sin(ph)], axis=-1
    ).reshape(-1, 3)

    def vid(i, j):
        return (i % n_major) * n_minor + (j % n_minor)

    triangles = []
    for i in range(n_major):
        for j in range(n_minor):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            triangles.append((a, b, c))
            triangles.append((a, c, d))
    return TriangulatedSurface(vertices, np.array(triangles), geometry)


def generate_implicit(seed_mesh, geometry):
    """Project every vertex of a closed seed mesh onto an implicit surface."""
    if not seed_mesh.is_closed:
        raise MeshError("seed mesh for implicit projection must be closed")
    vertices = geometry.project(seed_mesh.vertices)
    return TriangulatedSurface(vertices, seed_mesh.triangles.copy(), geometry)


def generate_disk(level, radius=1.0, sector_angle=2.0 * np.pi):
    """Fan triangulation of a flat disk or circular sector, refined ``level`` times."""
    if level > _MAX_LEVEL:
        raise MeshError(f"refinement level {level} exceeds guard {_MAX_LEVEL}")
    geometry = PlanarDisk(radius, sector_angle)
    full = abs(sector_angle - 2.0 * np.pi) < 1e-14
    n_seg = 6 if full else max(1, int(np.ceil(sector_angle / (np.pi / 3.0))))
    n_ring = n_seg if full else n_seg + 1
    angles = sector_angle * np.arange(n_ring) / n_seg
    ring = radius * np.stack(
        [np.cos(angles), np.sin(angles), np.zeros(n_ring)], axis=-1
    )
    vertices = np.vstack([np.zeros((1, 3)), ring])
    triangles = [
        (0, 1 + i, 1 + (i + 1) % n_ring if full else 2 + i) for i in range(n_seg)
    ]
    mesh = TriangulatedSurface(vertices, np.array(triangles, dtype=np.int64), geometry)
    for _ in range(level):
        mesh, _ = refine(mesh)
    return mesh


def refine(mesh):
    """Uniform red refinement: every triangle splits into four.

    Edge midpoints are projected onto the exact geometry. Returns the child
    mesh together with the :class:`ProlongationMap` for field transfer.
    """
    edges = mesh.edges
    n_parent = mesh.n_vertices

    xa = mesh.vertices[edges[:, 0]]
    xb = mesh.vertices[edges[:, 1]]
    mid = 0.5 * (xa + xb)
    boundary_edge = mesh.edge_counts == 1
    mid = mesh.geometry.project_edge_midpoints(mid, xa, xb, boundary_edge)
    vertices = np.vstack([mesh.vertices, mid])

    t = mesh.triangles
    m01 = n_parent + mesh._edge_of_slot[0]
    m12 = n_parent + mesh._edge_of_slot[1]
    m02 = n_parent + mesh._edge_of_slot[2]
    children = np.concatenate(
        [
            np.stack([t[:, 0], m01, m02], axis=1),
            np.stack([t[:, 1], m12, m01], axis=1),
            np.stack([t[:, 2], m02, m12], axis=1),
            np.stack([m01, m12, m02], axis=1),
        ]
    )
    child = TriangulatedSurface(vertices, children, mesh.geometry)
    pmap = ProlongationMap(
        parent_id=mesh.mesh_id,
        child_id=child.mesh_id,
        n_parent=n_parent,
        edges=edges.copy(),
    )
    return child, pmap
