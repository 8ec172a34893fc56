import numpy as np
import pytest

from saddleflow.lp_model import PrimalDualState, StandardFormLP


@pytest.fixture
def lp1():
    return StandardFormLP(np.array([[1.0, 1.0]]), np.array([1.0]), np.array([1.0, 2.0]), name="LP-1")


@pytest.fixture
def lp1_star():
    return PrimalDualState(np.array([1.0, 0.0]), np.array([-1.0]))


@pytest.fixture
def ray_lp():
    # min x1 s.t. x1 - x2 = 0: unbounded feasible set along (1, 1)
    return StandardFormLP(np.array([[1.0, -1.0]]), np.array([0.0]), np.array([1.0, 0.0]), name="ray")


@pytest.fixture
def segment_lp():
    # min x1 + x2 s.t. x1 + x2 = 1: the whole segment is optimal
    return StandardFormLP(np.array([[1.0, 1.0]]), np.array([1.0]), np.array([1.0, 1.0]), name="segment")
