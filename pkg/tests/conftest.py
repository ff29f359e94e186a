import numpy as np
import pytest

from rvgeom.fixtures import load_fixture
from rvgeom.mdp import Mdp, random_simplex
from rvgeom.robust import SARectangularSet, SRectangularSet


def random_mdp(rng, S, A, gamma=0.9):
    return Mdp(rng.uniform(0.0, 1.0, (S, A)), random_simplex(rng, (S, A, S)), gamma)


def random_s_rect(rng, S, A, k_max=3, gamma=0.9):
    m = random_mdp(rng, S, A, gamma)
    u = SRectangularSet(tuple(random_simplex(rng, (int(rng.integers(1, k_max + 1)), A, S)) for _ in range(S)))
    return m, u


def random_sa_rect(rng, S, A, k_max=2, gamma=0.9):
    m = random_mdp(rng, S, A, gamma)
    u = SARectangularSet(
        tuple(tuple(random_simplex(rng, (int(rng.integers(1, k_max + 1)), S)) for _ in range(A)) for _ in range(S))
    )
    return m, u


def routing_rmdp():
    """s2 absorbs with reward 0; at s1 (reward 1) the adversary may stay or route to s2."""
    m = Mdp([[1.0], [0.0]], [[[1.0, 0.0]], [[0.0, 1.0]]], 0.9)
    u = SRectangularSet((np.array([[[1.0, 0.0]], [[0.0, 1.0]]]), np.array([[[0.0, 1.0]]])))
    return m, u


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def fig2():
    return load_fixture("mdp_2s3a")


@pytest.fixture(scope="session")
def srect():
    return load_fixture("rmdp_srect")


@pytest.fixture(scope="session")
def sarect():
    return load_fixture("rmdp_sarect")


@pytest.fixture(scope="session")
def conic():
    return load_fixture("rmdp_conic")


@pytest.fixture(scope="session")
def nonstar():
    return load_fixture("rmdp_nonstar")
