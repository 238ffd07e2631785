"""P1 surface finite elements: mass/stiffness assembly, norms, penalty energy."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class AssemblyError(ValueError):
    pass


# 6-point triangle quadrature, exact for polynomials of degree 4.
# Barycentric points and weights (weights sum to 1, scale by triangle area).
_QP_A = 0.445948490915965
_QP_B = 0.091576213509771
_QW_A = 0.223381589678011
_QW_B = 0.109951743655322
TRI_QUAD_POINTS = np.array(
    [
        (_QP_A, _QP_A, 1 - 2 * _QP_A),
        (_QP_A, 1 - 2 * _QP_A, _QP_A),
        (1 - 2 * _QP_A, _QP_A, _QP_A),
        (_QP_B, _QP_B, 1 - 2 * _QP_B),
        (_QP_B, 1 - 2 * _QP_B, _QP_B),
        (1 - 2 * _QP_B, _QP_B, _QP_B),
    ]
)
TRI_QUAD_WEIGHTS = np.array([_QW_A, _QW_A, _QW_A, _QW_B, _QW_B, _QW_B])

_MASS_LOCAL = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def _triangle_frames(mesh):
    """Per-triangle areas and tangential P1 basis gradients."""
    x = mesh.vertices[mesh.triangles]
    normal = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
    double_area = np.linalg.norm(normal, axis=1)
    area = 0.5 * double_area
    if np.any(area <= 0) or np.any(area < 1e-12 * np.median(area)):
        raise AssemblyError(f"degenerate triangle {int(np.argmin(area))}")
    unit_normal = normal / double_area[:, None]
    # gradient of hat function at vertex i: (n x e_i) / (2 area),
    # with e_i the opposite edge traversed counterclockwise
    grads = np.empty((len(x), 3, 3))
    opposite = (x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0])
    for i, e in enumerate(opposite):
        grads[:, i, :] = np.cross(unit_normal, e) / double_area[:, None]
    return area, grads


def _assemble(mesh, local):
    """Assemble a symmetric matrix from (t, 3, 3) local contributions."""
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    mat = sp.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(mesh.n_vertices, mesh.n_vertices)
    ).tocsr()
    mat.sum_duplicates()
    return mat


def assemble_mass(mesh):
    """Consistent P1 mass matrix of the L2 pairing on the triangulated surface."""
    area, _ = _triangle_frames(mesh)
    local = area[:, None, None] * _MASS_LOCAL[None, :, :]
    return _assemble(mesh, local)


def assemble_stiffness(mesh):
    """P1 stiffness matrix from tangential gradients on each flat triangle."""
    area, grads = _triangle_frames(mesh)
    local = area[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)
    return _assemble(mesh, local)


def l2_norm(f, mass):
    f = np.asarray(f, dtype=float)
    if f.shape[0] != mass.shape[0]:
        raise ValueError("field/matrix dimension mismatch")
    return float(np.sqrt(max(f @ (mass @ f), 0.0)))


def dirichlet_energy(f, stiffness):
    """Squared H1 semi-norm; the eigenvalue estimate for L2-normalised fields."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] != stiffness.shape[0]:
        raise ValueError("field/matrix dimension mismatch")
    return float(f @ (stiffness @ f))


def _quadrature_values(values, mesh):
    """Field values at the 6 quadrature points of every triangle.

    ``values`` is (n_vertices,) or (n_vertices, m); returns (q, t[, m]).
    """
    corner = values[mesh.triangles]  # (t, 3[, m])
    return np.einsum("qc,tc...->qt...", TRI_QUAD_POINTS, corner)


def penalty_energy(values, mesh, epsilon):
    """Segregation penalty integral sum_i sum_{j!=i} u_i^2 u_j^2 / eps^2.

    The integrand is quartic per triangle, so the degree-4 quadrature is
    exact for P1 fields.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != mesh.n_vertices:
        raise ValueError("field/mesh dimension mismatch")
    area, _ = _triangle_frames(mesh)
    uq = _quadrature_values(values, mesh)  # (q, t, m)
    s2 = np.einsum("qtm,qtm->qt", uq, uq)
    s4 = np.einsum("qtm->qt", uq**4)
    per_tri = np.einsum("q,qt->t", TRI_QUAD_WEIGHTS, s2**2 - s4)
    # the integrand is nonnegative; cancellation can leave -O(ulp)
    return max(float(np.dot(area, per_tri)) / epsilon**2, 0.0)


def penalty_eigenvalue_terms(values, mesh, epsilon):
    """Per-component penalty contributions (2/eps^2) * int u_i^2 (S - u_i^2)."""
    values = np.asarray(values, dtype=float)
    area, _ = _triangle_frames(mesh)
    uq = _quadrature_values(values, mesh)  # (q, t, m)
    u2 = uq**2
    s2 = np.einsum("qtm->qt", u2)
    integrand = u2 * (s2[:, :, None] - u2)
    per_component = np.einsum("q,qtm,t->m", TRI_QUAD_WEIGHTS, integrand, area)
    return 2.0 * per_component / epsilon**2


def prolong(f, pmap):
    """Transfer a nodal field to the refined mesh (P1 interpolation)."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] != pmap.n_parent:
        raise ValueError("field does not live on the map's parent mesh")
    mids = 0.5 * (f[pmap.edges[:, 0]] + f[pmap.edges[:, 1]])
    return np.concatenate([f, mids])


def eliminate_dirichlet(matrix, mask):
    """Row/column elimination with identity diagonal on masked vertices.

    Preserves symmetry; used only by the disk-sector eigenvalue oracle.
    """
    mask = np.asarray(mask, dtype=bool)
    keep = sp.diags((~mask).astype(float))
    fixed = sp.diags(mask.astype(float))
    return (keep @ matrix @ keep + fixed).tocsr()
