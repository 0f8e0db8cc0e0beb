import numpy as np
import pytest

from tdbem import mesh as msh


def tetrahedron_mesh():
    verts = np.array(
        [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float
    )
    tris = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return msh.make_mesh(verts, tris)


@pytest.fixture(scope="session")
def tet():
    return tetrahedron_mesh()


@pytest.fixture(scope="session")
def sphere2():
    return msh.generate_sphere(1.0, 2)


@pytest.fixture(scope="session")
def small_torus():
    return msh.generate_torus(0.75, 0.25, 8, 6)


@pytest.fixture(scope="session")
def small_pyramid():
    return msh.generate_star_pyramid(0.5, 1.0, 0.3, 5, 0)
