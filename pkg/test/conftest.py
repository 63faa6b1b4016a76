import numpy as np
import pytest

from chebfem.mesh import CurvedQuadElement, Materials, Mesh, generate_curved_domain, generate_square_domain

# corner nodes of the square [-1,1]^2 split at x = 0
#   3 --- 4 --- 5
#   |     |     |
#   0 --- 1 --- 2
SPLIT_SQUARE_NODES = [(-1.0, -1.0), (0.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (0.0, 1.0), (1.0, 1.0)]


def split_square(right_element, right_boundary) -> Mesh:
    left = CurvedQuadElement(1, [0, 1, 3, 4])
    boundary = [(0, 0), (0, 2), (0, 3)] + [(1, k) for k in right_boundary]
    return Mesh(SPLIT_SQUARE_NODES, [left, CurvedQuadElement(1, right_element)], boundary, Materials()).validate()


@pytest.fixture
def identity_mesh():
    """Single bilinear element whose map is the identity on [-1,1]^2."""
    return generate_square_domain()


@pytest.fixture
def flipped_pair_mesh():
    """Right element numbered from the opposite corner, the shared edge is traversed in reverse."""
    return split_square([5, 4, 2, 1], [0, 2, 3])


@pytest.fixture
def rotated_pair_mesh():
    """Right element rotated a quarter turn, its u axis runs along +y."""
    return split_square([2, 5, 1, 4], [0, 1, 3])


@pytest.fixture
def plain_pair_mesh():
    return split_square([1, 2, 4, 5], [0, 1, 2])


@pytest.fixture(scope='session')
def curved_mesh():
    return generate_curved_domain()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
