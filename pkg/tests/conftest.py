import numpy as np
import pytest

from ibckit import box, hull_from_points
from ibckit.linsys import LinearSystem
from ibckit.models import ArmParams, QuadrotorParams, UnicycleParams, safe_speed_profile


HEX_POINTS = np.array(
    [[-0.8, -1.0], [0.8, -1.0], [0.8, 1.0], [-0.8, 1.0], [1.0, 0.0], [-1.0, 0.0]]
)


def same_vertex_set(va, vb, tol=1e-9):
    va = np.asarray(va, dtype=float)
    vb = np.asarray(vb, dtype=float)
    if va.shape != vb.shape:
        return False
    used = set()
    for v in va:
        d = np.linalg.norm(vb - v, axis=1)
        hits = [i for i in np.argsort(d) if d[i] <= tol and i not in used]
        if not hits:
            return False
        used.add(hits[0])
    return True


@pytest.fixture(scope="session")
def di():
    return LinearSystem(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]))


@pytest.fixture(scope="session")
def hexagon():
    return hull_from_points(HEX_POINTS)


@pytest.fixture(scope="session")
def pbox():
    return box([-0.8, -1.0], [0.8, 1.0])


@pytest.fixture(scope="session")
def eq5():
    A = np.array(
        [[0.0, 0, 0, 0], [0, 0, 0, 0], [1, 0, 1, 1], [0, 1, 0, 1]], dtype=float
    )
    B = np.array([[1.0, 0], [0, 1], [0, 0], [0, 0]])
    return LinearSystem(A, B)


@pytest.fixture(scope="session")
def arm_profile():
    return safe_speed_profile(ArmParams().axis_spec())


@pytest.fixture(scope="session")
def arm_profile_tight():
    return safe_speed_profile(ArmParams(torque_bound=8.0).axis_spec())


@pytest.fixture(scope="session")
def uni_profile():
    return safe_speed_profile(UnicycleParams().axis_spec())


@pytest.fixture(scope="session")
def quad_profile():
    return safe_speed_profile(QuadrotorParams().axis_spec())
