import numpy as np
import pytest

from carnotkit import groups as G
from carnotkit import measures as M
from carnotkit import planes as P
from carnotkit.planes import VerticalPlane


@pytest.fixture(scope="session")
def h1():
    return G.builtin_group("h1")


@pytest.fixture(scope="session")
def h2():
    return G.builtin_group("h2")


@pytest.fixture(scope="session")
def engel():
    return G.builtin_group("engel")


@pytest.fixture(scope="session")
def r3():
    return G.builtin_group("r3")


@pytest.fixture(scope="session")
def ex_plane():
    return VerticalPlane(np.array([1.0, 0.0]))


@pytest.fixture(scope="session")
def h1_flat_32(h1, ex_plane):
    """Plane quadrature at pitch 1/32 over radius 2, as a measure."""
    pts, wts = P.flat_quadrature(h1, ex_plane, np.zeros(3), 2.0, 1 / 32)
    return M.DiscreteMeasure(h1, pts, wts, support_tag="plane")
