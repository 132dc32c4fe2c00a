import numpy as np
import pytest

from otmesh.base_meshes import HexIcosahedron, SquareGrid, build_base_mesh

SEED = 20260817


@pytest.fixture(scope="session")
def square16():
    return build_base_mesh(SquareGrid(16))


@pytest.fixture(scope="session")
def square30():
    return build_base_mesh(SquareGrid(30))


@pytest.fixture(scope="session")
def hex2():
    return build_base_mesh(HexIcosahedron(2))


@pytest.fixture(scope="session")
def hex3():
    return build_base_mesh(HexIcosahedron(3))


@pytest.fixture(scope="session")
def hex4():
    return build_base_mesh(HexIcosahedron(4))


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)
