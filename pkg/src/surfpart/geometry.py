"""Exact surface geometries backing triangulated meshes.

Each geometry knows how to project points onto itself, so refined meshes
keep their vertices on the true surface.
"""
from __future__ import annotations

import numpy as np


class GeometryError(ValueError):
    """Invalid geometric parameters."""


class ProjectionError(RuntimeError):
    """Projection of a point onto the surface failed."""


class Sphere:
    """Sphere of given radius centred at the origin."""

    closed = True

    def __init__(self, radius=1.0):
        if radius <= 0:
            raise GeometryError("sphere radius must be positive")
        self.radius = float(radius)

    def diameter(self):
        return 2.0 * self.radius

    def project(self, points):
        points = np.asarray(points, dtype=float)
        norms = np.linalg.norm(points, axis=-1, keepdims=True)
        if np.any(norms == 0.0):
            raise ProjectionError("cannot project the origin onto a sphere")
        return self.radius * points / norms

    def project_edge_midpoints(self, mid, xa, xb, boundary):
        return self.project(mid)

    def residual(self, points):
        return np.abs(np.linalg.norm(points, axis=-1) - self.radius)


class Torus:
    """Torus of revolution about the z-axis.

    ``major_radius`` is the distance from the axis to the tube centre,
    ``minor_radius`` the tube radius; requires ``minor < major``.
    """

    closed = True

    def __init__(self, major_radius, minor_radius):
        if major_radius <= 0 or minor_radius <= 0:
            raise GeometryError("torus radii must be positive")
        if minor_radius >= major_radius:
            raise GeometryError("torus requires minor radius < major radius")
        self.major_radius = float(major_radius)
        self.minor_radius = float(minor_radius)

    def diameter(self):
        return 2.0 * (self.major_radius + self.minor_radius)

    def _tube_centres(self, points):
        rho = np.hypot(points[..., 0], points[..., 1])
        if np.any(rho == 0.0):
            raise ProjectionError("point on the torus axis has no projection")
        scale = self.major_radius / rho
        centres = np.zeros_like(points)
        centres[..., 0] = points[..., 0] * scale
        centres[..., 1] = points[..., 1] * scale
        return centres

    def project(self, points):
        points = np.asarray(points, dtype=float)
        centres = self._tube_centres(points)
        d = points - centres
        norms = np.linalg.norm(d, axis=-1, keepdims=True)
        if np.any(norms == 0.0):
            raise ProjectionError("point on the tube centreline has no projection")
        return centres + self.minor_radius * d / norms

    def project_edge_midpoints(self, mid, xa, xb, boundary):
        return self.project(mid)

    def residual(self, points):
        points = np.asarray(points, dtype=float)
        rho = np.hypot(points[..., 0], points[..., 1])
        tube = np.hypot(rho - self.major_radius, points[..., 2])
        return np.abs(tube - self.minor_radius)


class ImplicitSurface:
    """Zero level set of a smooth function with nonvanishing gradient.

    ``level`` maps (n, 3) arrays to (n,) values and ``gradient`` to (n, 3)
    vectors. Projection uses damped Newton steps along the gradient; the
    damping factor is halved whenever a step fails to reduce the residual.
    """

    closed = True

    def __init__(self, level, gradient, diameter=3.0, tol=1e-12, max_steps=100):
        self.level = level
        self.gradient = gradient
        self._diameter = float(diameter)
        self.tol = float(tol)
        self.max_steps = int(max_steps)

    def diameter(self):
        return self._diameter

    def project(self, points):
        x = np.array(points, dtype=float, copy=True)
        phi = self.level(x)
        damping = np.ones(len(x))
        for _ in range(self.max_steps):
            active = np.abs(phi) > self.tol
            if not active.any():
                return x
            xa = x[active]
            ga = self.gradient(xa)
            gsq = np.einsum("ij,ij->i", ga, ga)
            if np.any(gsq == 0.0):
                bad = np.flatnonzero(active)[np.flatnonzero(gsq == 0.0)[0]]
                raise ProjectionError(f"vanishing gradient at vertex {bad}")
            step = (phi[active] / gsq)[:, None] * ga
            trial = xa - damping[active, None] * step
            phi_trial = self.level(trial)
            improved = np.abs(phi_trial) < np.abs(phi[active])
            # accept improving steps and reset their damping; halve the rest
            new_x = np.where(improved[:, None], trial, xa)
            new_phi = np.where(improved, phi_trial, phi[active])
            d = damping[active]
            damping[active] = np.where(improved, 1.0, 0.5 * d)
            x[active] = new_x
            phi[active] = new_phi
        bad = int(np.argmax(np.abs(phi)))
        raise ProjectionError(
            f"Newton projection did not converge within {self.max_steps} steps "
            f"(worst vertex {bad}, |phi| = {abs(phi[bad]):.3e})"
        )

    def project_edge_midpoints(self, mid, xa, xb, boundary):
        return self.project(mid)

    def residual(self, points):
        return np.abs(self.level(np.asarray(points, dtype=float)))


def dziuk_surface():
    """Genus-zero surface with strong curvature variation (Dziuk's example)."""

    def level(x):
        q = x[..., 0] - x[..., 2] ** 2
        return q**2 + x[..., 1] ** 2 + x[..., 2] ** 2 - 1.0

    def gradient(x):
        q = x[..., 0] - x[..., 2] ** 2
        g = np.empty_like(x)
        g[..., 0] = 2.0 * q
        g[..., 1] = 2.0 * x[..., 1]
        g[..., 2] = 2.0 * x[..., 2] * (1.0 - 2.0 * q)
        return g

    return ImplicitSurface(level, gradient, diameter=3.0)


class PlanarDisk:
    """Flat disk or circular sector in the plane x3 = 0.

    The only geometry with boundary; used by the disk/sector eigenvalue
    cross-checks, never by the segregation flow.
    """

    closed = False

    def __init__(self, radius=1.0, sector_angle=2.0 * np.pi):
        if radius <= 0:
            raise GeometryError("disk radius must be positive")
        if not 0.0 < sector_angle <= 2.0 * np.pi:
            raise GeometryError("sector angle must lie in (0, 2*pi]")
        self.radius = float(radius)
        self.sector_angle = float(sector_angle)

    def diameter(self):
        return 2.0 * self.radius

    def project(self, points):
        out = np.array(points, dtype=float, copy=True)
        out[..., 2] = 0.0
        return out

    def project_edge_midpoints(self, mid, xa, xb, boundary):
        out = self.project(mid)
        # midpoints of boundary edges lying on the circular arc are pushed
        # back onto the arc; straight (radial) boundary edges stay put
        tol = 1e-9 * self.radius
        on_arc = (
            boundary
            & (np.abs(np.linalg.norm(xa, axis=-1) - self.radius) <= tol)
            & (np.abs(np.linalg.norm(xb, axis=-1) - self.radius) <= tol)
        )
        if on_arc.any():
            norms = np.linalg.norm(out[on_arc], axis=-1, keepdims=True)
            out[on_arc] *= self.radius / norms
        return out

    def residual(self, points):
        return np.abs(np.asarray(points, dtype=float)[..., 2])
