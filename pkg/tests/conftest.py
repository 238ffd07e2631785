import numpy as np
import pytest

from surfpart import fem
from surfpart.mesh import generate_icosphere
from surfpart.segregation import ComponentEnsemble, normalize_step


def y_partition_fields(mesh):
    """First eigenfunctions of the three-lune partition of the unit sphere.

    Each component is sin(3 phi'/2) (sin theta)^(3/2) on its 120-degree
    lune, zero elsewhere, normalised in the discrete L2 norm.
    """
    x = mesh.vertices
    theta = np.arccos(np.clip(x[:, 2], -1.0, 1.0))
    phi = np.arctan2(x[:, 1], x[:, 0]) % (2.0 * np.pi)
    third = 2.0 * np.pi / 3.0
    columns = []
    for k in range(3):
        p = (phi - k * third) % (2.0 * np.pi)
        u = np.where(p < third, np.sin(1.5 * p), 0.0) * np.sin(theta) ** 1.5
        columns.append(np.clip(u, 0.0, None))
    values = np.column_stack(columns)
    return normalize_step(values, fem.assemble_mass(mesh))


def y_partition_ensemble(mesh, epsilon=0.05, tau=1e-3):
    return ComponentEnsemble(y_partition_fields(mesh), epsilon, tau, mesh)


@pytest.fixture(scope="session")
def icosphere3():
    return generate_icosphere(3)


@pytest.fixture(scope="session")
def icosphere4():
    return generate_icosphere(4)
