import numpy as np
import pytest

from qcjdr.physmodel import TransducerParams, transduction_channel


@pytest.fixture(scope="session")
def cold_channel():
    return transduction_channel(TransducerParams.fiducial(1e-3))


@pytest.fixture(scope="session")
def hot_channel():
    return transduction_channel(TransducerParams.fiducial(1.0))


def random_density(dim, rng, rank=None):
    rank = rank or dim
    A = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


def random_unitary(dim, rng):
    from scipy.stats import unitary_group

    return unitary_group.rvs(dim, random_state=rng)
