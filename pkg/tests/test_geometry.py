import numpy as np
import pytest

from surfpart.geometry import (GeometryError, PlanarDisk, ProjectionError,
                               Sphere, Torus, dziuk_surface)


def test_sphere_projection_lands_on_radius():
    sphere = Sphere(2.0)
    pts = np.array([[3.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.0, -0.1, 0.0]])
    proj = sphere.project(pts)
    assert np.allclose(np.linalg.norm(proj, axis=1), 2.0)
    assert np.max(sphere.residual(proj)) < 1e-14


def test_sphere_rejects_origin_and_bad_radius():
    with pytest.raises(ProjectionError):
        Sphere().project(np.zeros((1, 3)))
    with pytest.raises(GeometryError):
        Sphere(-1.0)


def test_torus_projection_residual():
    torus = Torus(0.8, 0.2)
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(50, 3))
    proj = torus.project(pts)
    assert np.max(torus.residual(proj)) < 1e-14


def test_torus_parameter_validation():
    with pytest.raises(GeometryError):
        Torus(0.2, 0.8)
    with pytest.raises(ProjectionError):
        Torus(0.8, 0.2).project(np.array([[0.0, 0.0, 1.0]]))


def test_dziuk_projection_converges():
    surf = dziuk_surface()
    rng = np.random.default_rng(7)
    pts = rng.normal(scale=0.8, size=(200, 3)) + np.array([0.3, 0.0, 0.0])
    proj = surf.project(pts)
    assert np.max(surf.residual(proj)) <= 1e-12


def test_dziuk_gradient_matches_finite_differences():
    surf = dziuk_surface()
    rng = np.random.default_rng(11)
    x = rng.normal(size=(20, 3))
    g = surf.gradient(x)
    eps = 1e-6
    for c in range(3):
        d = np.zeros(3)
        d[c] = eps
        fd = (surf.level(x + d) - surf.level(x - d)) / (2 * eps)
        assert np.allclose(g[:, c], fd, atol=1e-6)


def test_disk_midpoint_projection_arc_only():
    disk = PlanarDisk(1.0)
    # arc edge: both endpoints on the circle
    xa = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    xb = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    mid = 0.5 * (xa + xb)
    out = disk.project_edge_midpoints(mid.copy(), xa, xb,
                                      np.array([True, True]))
    assert np.isclose(np.linalg.norm(out[0]), 1.0)       # pushed to the arc
    assert np.allclose(out[1], mid[1])                   # radial edge kept


def test_sector_angle_validation():
    with pytest.raises(GeometryError):
        PlanarDisk(1.0, 3.0 * np.pi)
