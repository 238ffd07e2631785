"""Geometric analysis of converged ensembles: labels, boundaries, curvature,
dual-graph statistics and eigenvalue summaries."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import fem

VOID = -1


@dataclass
class Polyline:
    """Zero-level curve sampled on triangle edges.

    ``edges[k]`` are the mesh-edge endpoints carrying point k and
    ``params[k]`` the linear coordinate along that edge.
    """

    points: np.ndarray
    edges: np.ndarray
    params: np.ndarray
    closed: bool

    def length(self):
        total = float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))
        if self.closed and len(self.points) > 2:
            total += float(np.linalg.norm(self.points[0] - self.points[-1]))
        return total


@dataclass
class Junction:
    position: np.ndarray
    vertices: np.ndarray
    degree: int


@dataclass
class PartitionExtraction:
    labels: np.ndarray            # component index per vertex, VOID where none
    signed_indicators: np.ndarray
    boundary_curves: list         # per component: list of Polyline
    junctions: list               # list of Junction
    dual_stats: dict              # edge count k -> number of partitions n_k
    edges_per_component: np.ndarray
    areas: np.ndarray
    empty_components: list = field(default_factory=list)


@dataclass
class CurvatureSamples:
    positions: np.ndarray
    kappa_g: np.ndarray
    arc_length: np.ndarray
    junction_distance: np.ndarray
    valid: np.ndarray


@dataclass
class DualGraphReport:
    lhs: float
    rhs: float
    holds: bool
    assumption_violated: bool
    max_junction_degree: int


def signed_indicators(values):
    """v_i = u_i minus the sum of all other components, nodally."""
    values = np.asarray(values, dtype=float)
    return 2.0 * values - np.sum(values, axis=1, keepdims=True)


def _sign_labels(v):
    labels = np.argmax(v, axis=1)
    positive = v[np.arange(len(v)), labels] > 0.0
    labels = np.where(positive, labels, VOID)
    return labels


def _one_ring(mesh):
    e = mesh.edges
    n = mesh.n_vertices
    data = np.ones(2 * len(e) + n, dtype=np.int8)
    rows = np.concatenate([e[:, 0], e[:, 1], np.arange(n)])
    cols = np.concatenate([e[:, 1], e[:, 0], np.arange(n)])
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def _detect_junctions(mesh, labels, m):
    """Vertices whose two-ring sees at least 3 labels, clustered into points.

    ``labels`` must be void-free (the argmax map); on it a junction is a
    sharp point, so a fixed two-ring radius suffices at any penalty width.
    """
    n = mesh.n_vertices
    indicator = sp.csr_matrix(
        (np.ones(n, dtype=np.int8), (np.arange(n), labels)), shape=(n, m)
    )
    ring = _one_ring(mesh)
    two_ring_labels = ((ring @ ring) @ indicator) > 0
    diversity = np.asarray(two_ring_labels.sum(axis=1)).ravel()
    candidates = diversity >= 3
    if not candidates.any():
        return []
    sub = ring[np.ix_(candidates, candidates)]
    n_clusters, membership = connected_components(sub, directed=False)
    candidate_ids = np.flatnonzero(candidates)
    junctions = []
    lab_csr = two_ring_labels.tocsr()
    for c in range(n_clusters):
        verts = candidate_ids[membership == c]
        seen = np.zeros(m, dtype=bool)
        for v in verts:
            seen[lab_csr[v].indices] = True
        junctions.append(Junction(
            position=mesh.vertices[verts].mean(axis=0),
            vertices=verts,
            degree=int(np.count_nonzero(seen)),
        ))
    return junctions


def extract_boundary_curves(v_field, mesh):
    """Marching triangles on the zero level of one signed indicator."""
    tri = mesh.triangles
    corner = v_field[tri]
    pos = corner > 0.0
    n_pos = pos.sum(axis=1)
    mixed = np.flatnonzero((n_pos > 0) & (n_pos < 3))

    crossing = {}

    def crossing_point(a, b):
        key = (min(a, b), max(a, b))
        if key not in crossing:
            va, vb = v_field[key[0]], v_field[key[1]]
            t = va / (va - vb)
            crossing[key] = (key, t)
        return crossing[key]

    segments = []
    for ti in mixed:
        v0, v1, v2 = tri[ti]
        keys = []
        for a, b in ((v0, v1), (v1, v2), (v2, v0)):
            if (v_field[a] > 0.0) != (v_field[b] > 0.0):
                keys.append(crossing_point(a, b)[0])
        if len(keys) == 2:
            segments.append((keys[0], keys[1]))

    # chain segments into polylines; every edge key has degree <= 2
    links = defaultdict(list)
    for a, b in segments:
        links[a].append(b)
        links[b].append(a)
    visited = set()
    polylines = []

    def walk(start, nxt):
        chain = [start, nxt]
        visited.add(frozenset((start, nxt)))
        while True:
            cur, prev = chain[-1], chain[-2]
            options = [k for k in links[cur]
                       if k != prev and frozenset((cur, k)) not in visited]
            if not options:
                return chain
            visited.add(frozenset((cur, options[0])))
            chain.append(options[0])

    endpoints = [k for k, nb in links.items() if len(nb) == 1]
    for start in endpoints:
        if all(frozenset((start, nb)) in visited for nb in links[start]):
            continue
        nxt = next(nb for nb in links[start]
                   if frozenset((start, nb)) not in visited)
        chain = walk(start, nxt)
        polylines.append((chain, False))
    for a, b in segments:
        if frozenset((a, b)) in visited:
            continue
        chain = walk(a, b)
        closed = len(chain) > 2 and chain[0] == chain[-1]
        if closed:
            chain = chain[:-1]
        polylines.append((chain, closed))

    out = []
    for chain, closed in polylines:
        edges = np.array(chain, dtype=np.int64)
        params = np.array([crossing[tuple(k)][1] for k in chain])
        xa = mesh.vertices[edges[:, 0]]
        xb = mesh.vertices[edges[:, 1]]
        points = xa + params[:, None] * (xb - xa)
        out.append(Polyline(points, edges, params, closed))
    return out


def _positive_area(v_field, mesh):
    """Area of the positive set, clipping triangles against the P1 zero level."""
    tri = mesh.triangles
    corner = v_field[tri]
    pos = corner > 0.0
    n_pos = pos.sum(axis=1)
    areas = mesh.triangle_areas()
    total = float(np.sum(areas[n_pos == 3]))
    for ti in np.flatnonzero((n_pos > 0) & (n_pos < 3)):
        x = mesh.vertices[tri[ti]]
        v = corner[ti]
        poly = []
        for k in range(3):
            a, b = k, (k + 1) % 3
            if v[a] > 0.0:
                poly.append(x[a])
            if (v[a] > 0.0) != (v[b] > 0.0):
                t = v[a] / (v[a] - v[b])
                poly.append(x[a] + t * (x[b] - x[a]))
        poly = np.array(poly)
        acc = np.zeros(3)
        for k in range(1, len(poly) - 1):
            acc += np.cross(poly[k] - poly[0], poly[k + 1] - poly[0])
        total += 0.5 * float(np.linalg.norm(acc))
    return total


def _interface_edge_counts(mesh, nearest, m):
    """Boundary-arc counts per component from the void-free label map.

    Mesh edges whose endpoints carry different labels are grouped by label
    pair; the connected components of each group (connected through shared
    vertices) are the boundary arcs. At a triple junction exactly one arc
    per label pair is incident, so distinct arcs never merge, while a
    junction-free closed interface counts as a single edge.
    """
    e = mesh.edges
    la, lb = nearest[e[:, 0]], nearest[e[:, 1]]
    iface = np.flatnonzero(la != lb)

    by_pair = defaultdict(list)
    for k in iface:
        a, b = int(e[k, 0]), int(e[k, 1])
        pair = (min(nearest[a], nearest[b]), max(nearest[a], nearest[b]))
        by_pair[pair].append((a, b))

    edges_per_component = np.zeros(m, dtype=int)
    for (i, j), pair_edges in by_pair.items():
        parent = list(range(len(pair_edges)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        vertex_edges = defaultdict(list)
        for idx, (a, b) in enumerate(pair_edges):
            vertex_edges[a].append(idx)
            vertex_edges[b].append(idx)
        for ids in vertex_edges.values():
            root = find(ids[0])
            for other in ids[1:]:
                parent[find(other)] = root
        n_arcs = len({find(idx) for idx in range(len(pair_edges))})
        edges_per_component[i] += n_arcs
        edges_per_component[j] += n_arcs
    return edges_per_component


def extract_partition(ensemble):
    """Labels, boundary polylines, junctions and dual-graph statistics."""
    values, mesh = ensemble.values, ensemble.mesh
    m = values.shape[1]
    v = signed_indicators(values)
    labels = _sign_labels(v)
    nearest = np.argmax(values, axis=1)

    curves = [extract_boundary_curves(v[:, i], mesh) for i in range(m)]
    junctions = _detect_junctions(mesh, nearest, m)
    edges_per_component = _interface_edge_counts(mesh, nearest, m)
    areas = np.array([_positive_area(v[:, i], mesh) for i in range(m)])
    empty = [i for i in range(m) if not np.any(v[:, i] > 0.0)]

    dual_stats = {}
    for k in edges_per_component:
        dual_stats[int(k)] = dual_stats.get(int(k), 0) + 1
    return PartitionExtraction(
        labels=labels, signed_indicators=v, boundary_curves=curves,
        junctions=junctions, dual_stats=dual_stats,
        edges_per_component=edges_per_component, areas=areas,
        empty_components=empty,
    )


def recovered_gradient(f, mesh):
    """Per-vertex tangential gradient by area-weighted triangle averaging."""
    area, basis = fem._triangle_frames(mesh)
    tri_grad = np.einsum("tk,tkc->tc", f[mesh.triangles], basis)
    acc = np.zeros((mesh.n_vertices, 3))
    weight = np.zeros(mesh.n_vertices)
    for k in range(3):
        np.add.at(acc, mesh.triangles[:, k], area[:, None] * tri_grad)
        np.add.at(weight, mesh.triangles[:, k], area)
    return acc / weight[:, None]


def vertex_curvature_field(f, mesh, grad_floor=1e-10):
    """Weak divergence of the normalised recovered gradient, per vertex."""
    area, basis = fem._triangle_frames(mesh)
    grad = recovered_gradient(f, mesh)
    mag = np.linalg.norm(grad, axis=1)
    valid = mag >= grad_floor
    unit = np.zeros_like(grad)
    unit[valid] = grad[valid] / mag[valid, None]
    div = np.einsum("tkc,tkc->t", unit[mesh.triangles], basis)
    acc = np.zeros(mesh.n_vertices)
    weight = np.zeros(mesh.n_vertices)
    for k in range(3):
        np.add.at(acc, mesh.triangles[:, k], area * div)
        np.add.at(weight, mesh.triangles[:, k], area)
    return acc / weight, valid


def geodesic_curvature(v_field, mesh, curves, junctions=()):
    """Geodesic-curvature samples along zero-level polylines of ``v_field``."""
    kappa, valid = vertex_curvature_field(v_field, mesh)
    junction_positions = np.array([j.position for j in junctions]).reshape(-1, 3)

    positions, values, arcs, jdist, ok = [], [], [], [], []
    for poly in curves:
        seg = np.linalg.norm(np.diff(poly.points, axis=0), axis=1)
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        a, b = poly.edges[:, 0], poly.edges[:, 1]
        k = (1.0 - poly.params) * kappa[a] + poly.params * kappa[b]
        good = valid[a] & valid[b]
        if len(junction_positions):
            d = np.min(np.linalg.norm(
                poly.points[:, None, :] - junction_positions[None, :, :], axis=2
            ), axis=1)
        else:
            d = np.full(len(poly.points), np.inf)
        positions.append(poly.points)
        values.append(k)
        arcs.append(arc)
        jdist.append(d)
        ok.append(good)
    if not positions:
        empty3 = np.zeros((0, 3))
        empty = np.zeros(0)
        return CurvatureSamples(empty3, empty, empty, empty,
                                np.zeros(0, dtype=bool))
    return CurvatureSamples(
        np.vstack(positions), np.concatenate(values), np.concatenate(arcs),
        np.concatenate(jdist), np.concatenate(ok),
    )


def dual_graph_check(extraction, euler_characteristic):
    """Euler-formula balance on the edge-count histogram of the partition."""
    degrees = [j.degree for j in extraction.junctions]
    max_degree = max(degrees, default=3)
    if max_degree > 3:
        return DualGraphReport(np.nan, np.nan, False, True, max_degree)
    nk = extraction.dual_stats
    lhs = 4 * nk.get(2, 0) + 3 * nk.get(3, 0) + 2 * nk.get(4, 0) + nk.get(5, 0)
    rhs = 6 * euler_characteristic + sum(
        (k - 6) * n for k, n in nk.items() if k >= 7
    )
    return DualGraphReport(float(lhs), float(rhs), lhs == rhs, False, max_degree)


def component_eigenvalues(ensemble, stiffness):
    """Per-component eigenvalue estimates: the penalised Rayleigh quotient.

    The Dirichlet part plus the competition term; this is the quantity that
    converges to the first eigenvalue of the component's support.
    """
    values = ensemble.values
    lambdas = np.einsum("ni,ni->i", values, stiffness @ values)
    return lambdas + fem.penalty_eigenvalue_terms(values, ensemble.mesh,
                                                  ensemble.epsilon)


def eigenvalue_stats(ensemble, stiffness, class_labels=None):
    """Per-class mean and standard deviation of the eigenvalue estimates."""
    lambdas = component_eigenvalues(ensemble, stiffness)
    if class_labels is None:
        extraction = extract_partition(ensemble)
        class_labels = [f"{k}-gon" for k in extraction.edges_per_component]
    stats = {}
    for key in sorted(set(class_labels), key=str):
        members = lambdas[[i for i, c in enumerate(class_labels) if c == key]]
        stats[key] = (float(np.mean(members)), float(np.std(members)))
    return stats
