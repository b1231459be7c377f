# SPDX-License-Identifier: MIT

import numpy as np
import pytest

from utils.mesh_handler import Mesh, format_mesh
from utils.shapes import icosahedron, icosphere, octahedron, tetrahedron, torus


@pytest.fixture
def tetra():
    return tetrahedron()


@pytest.fixture
def octa():
    return octahedron()


@pytest.fixture
def ico():
    return icosahedron()


@pytest.fixture(scope="session")
def ico2():
    return icosphere(2)


@pytest.fixture(scope="session")
def ico3():
    return icosphere(3)


@pytest.fixture
def torus_mesh():
    return torus()


@pytest.fixture
def single_triangle():
    return Mesh([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], [[0, 1, 2]])


@pytest.fixture
def mesh_file(tmp_path):
    """Write a mesh to disk and return its path."""

    def write(mesh, name="mesh.off"):
        path = tmp_path / name
        path.write_text(format_mesh(mesh, "OBJ" if name.endswith(".obj") else "OFF"))
        return str(path)

    return write


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
