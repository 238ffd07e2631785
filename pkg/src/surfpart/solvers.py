"""Iterative linear algebra: Jacobi-preconditioned CG and an eigenvalue oracle."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_HEAT_TOL = 1e-10
DEFAULT_ORACLE_TOL = 1e-8


class PreconditionerError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass
class SolveReport:
    iterations: int
    final_residual_norm: float
    converged: bool
    residual_history: list = field(default_factory=list, repr=False)


def pcg_solve(matrix, rhs, x0=None, rel_tol=DEFAULT_HEAT_TOL, max_iter=None,
              keep_history=False):
    """Conjugate gradients with Jacobi (diagonal) preconditioning.

    ``matrix`` must be symmetric positive definite. Stops when the residual
    2-norm drops below ``rel_tol * ||rhs||``; deterministic for fixed inputs.
    Non-convergence is reported, not raised -- the caller decides.
    """
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    n = matrix.shape[0]
    if max_iter is None:
        max_iter = 10 * n
    diag = matrix.diagonal()
    if np.any(diag == 0.0):
        raise PreconditionerError(
            f"zero diagonal entry at row {int(np.argmin(np.abs(diag)))}"
        )
    inv_diag = 1.0 / diag

    b = np.asarray(rhs, dtype=float)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)
    target = rel_tol * b_norm

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float, copy=True)
    r = b - matrix @ x
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    res_norm = float(np.linalg.norm(r))
    history = [res_norm] if keep_history else []

    iterations = 0
    while res_norm > target and iterations < max_iter:
        ap = matrix @ p
        alpha = rz / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        res_norm = float(np.linalg.norm(r))
        iterations += 1
        if keep_history:
            history.append(res_norm)

    report = SolveReport(iterations, res_norm, res_norm <= target, history)
    return x, report


def smallest_eigenpair(stiffness, mass, dirichlet_mask=None, tol=1e-8,
                       max_iter=200, inner_rel_tol=DEFAULT_ORACLE_TOL):
    """Smallest eigenpair of ``A v = lambda M v`` by inverse power iteration.

    Vertices flagged in ``dirichlet_mask`` are fixed to zero. Each iteration
    solves with :func:`pcg_solve`; the iteration stops once successive
    Rayleigh quotients agree to relative tolerance ``tol``. Returns the
    eigenvalue and the M-normalised eigenvector on the full vertex set.
    """
    n = stiffness.shape[0]
    if dirichlet_mask is None:
        dirichlet_mask = np.zeros(n, dtype=bool)
    dirichlet_mask = np.asarray(dirichlet_mask, dtype=bool)
    free = np.flatnonzero(~dirichlet_mask)
    if len(free) == 0:
        raise ValueError("all vertices are Dirichlet-constrained")
    a = stiffness[np.ix_(free, free)].tocsr()
    m = mass[np.ix_(free, free)].tocsr()

    v = np.ones(len(free))
    v /= np.sqrt(float(v @ (m @ v)))
    rayleigh = float(v @ (a @ v))
    for _ in range(max_iter):
        x, report = pcg_solve(a, m @ v, x0=v / rayleigh,
                              rel_tol=inner_rel_tol, max_iter=50 * len(free))
        if not report.converged:
            raise SolverError(
                f"inner solve stalled at residual {report.final_residual_norm:.3e}"
            )
        x /= np.sqrt(float(x @ (m @ x)))
        new_rayleigh = float(x @ (a @ x))
        done = abs(new_rayleigh - rayleigh) <= tol * abs(new_rayleigh)
        v, rayleigh = x, new_rayleigh
        if done:
            break
    else:
        raise SolverError("inverse power iteration did not converge")

    full = np.zeros(n)
    full[free] = v
    return rayleigh, full
