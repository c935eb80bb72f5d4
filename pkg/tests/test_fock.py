import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaln

from qcjdr._validation import ParameterError, TruncationError
from qcjdr.fock import (
    FockTruncation,
    annihilation,
    displaced_thermal,
    displacement_operator,
    mean_photon_number,
    number_operator,
    purity,
    thermal_populations,
    trace_distance,
)
from qcjdr.jc import bloch_vector

from conftest import random_density


def test_displacement_zero_is_identity():
    assert np.array_equal(displacement_operator(0, 10), np.eye(10))


@pytest.mark.parametrize("alpha", [0.3, 1.1 - 0.4j, 2.0j])
def test_displacement_on_vacuum_matches_coherent_expansion(alpha):
    dim = 60
    vac = np.zeros(dim)
    vac[0] = 1
    got = displacement_operator(alpha, dim) @ vac
    n = np.arange(20)
    # e^{-|a|^2/2} a^n / sqrt(n!) evaluated in log space
    expected = np.exp(-abs(alpha) ** 2 / 2 - 0.5 * gammaln(n + 1)) * alpha ** n
    np.testing.assert_allclose(got[:20], expected, atol=1e-10)


@pytest.mark.parametrize("alpha", [0.5, 1.5j, 2.0, -1.2 + 1.2j])
def test_displacement_inverse(alpha):
    for dim in (40, 64):
        D = displacement_operator(alpha, dim)
        assert np.linalg.norm(D @ displacement_operator(-alpha, dim) - np.eye(dim)) < 1e-9


def test_displacement_rejects_small_dim():
    with pytest.raises(TruncationError):
        displacement_operator(3.0, 8)
    with pytest.raises(ParameterError):
        displacement_operator(0.1, 1)


def test_coherent_limit_is_pure():
    rho = displaced_thermal(0.0, 1.3)
    assert purity(rho) == pytest.approx(1.0, abs=1e-9)


def test_thermal_populations_geometric():
    rho = displaced_thermal(1.0, 0.0)
    assert rho[0, 0].real == pytest.approx(0.5, abs=1e-8)
    assert rho[1, 1].real == pytest.approx(0.25, abs=1e-8)
    assert np.allclose(rho, np.diag(np.diag(rho)))


def test_mean_photon_identity_example():
    alpha = math.sqrt(0.924) * 2
    rho = displaced_thermal(1.8, alpha)
    assert mean_photon_number(rho) == pytest.approx(5.496, abs=1e-6)


def _quadratures(rho):
    dim = rho.shape[0]
    b = annihilation(dim)
    x = (b + b.conj().T) / math.sqrt(2)
    p = (b - b.conj().T) / (1j * math.sqrt(2))
    mx, mp = np.trace(rho @ x).real, np.trace(rho @ p).real
    vx = np.trace(rho @ x @ x).real - mx ** 2
    vp = np.trace(rho @ p @ p).real - mp ** 2
    cov = 0.5 * np.trace(rho @ (x @ p + p @ x)).real - mx * mp
    return mx, mp, vx, vp, cov


@pytest.mark.parametrize("nbar,alpha", [(0.0, 0.7), (0.5, 1 + 1j), (1.8, -1.5j)])
def test_gaussian_moments(nbar, alpha):
    rho = displaced_thermal(nbar, alpha, FockTruncation(leakage_tol=1e-12))
    mx, mp, vx, vp, cov = _quadratures(rho)
    assert mx == pytest.approx(math.sqrt(2) * complex(alpha).real, abs=1e-6)
    assert mp == pytest.approx(math.sqrt(2) * complex(alpha).imag, abs=1e-6)
    # the top Fock level of x^2 and p^2 is truncated; leave room for it
    assert vx == pytest.approx(nbar + 0.5, abs=1e-4)
    assert vp == pytest.approx(nbar + 0.5, abs=1e-4)
    assert cov == pytest.approx(0.0, abs=1e-4)


@settings(max_examples=30, deadline=None)
@given(nbar=st.floats(0, 3), re=st.floats(-2, 2), im=st.floats(-2, 2))
def test_displaced_thermal_invariants(nbar, re, im):
    alpha = complex(re, im)
    tol = 1e-8
    rho = displaced_thermal(nbar, alpha, FockTruncation(leakage_tol=tol))
    assert np.allclose(rho, rho.conj().T, atol=1e-12)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)
    assert np.linalg.eigvalsh(rho).min() > -1e-10
    assert rho.shape[0] >= 16
    assert mean_photon_number(rho) == pytest.approx(abs(alpha) ** 2 + nbar, abs=10 * tol)


def test_explicit_dim_and_leakage_error():
    rho = displaced_thermal(0.2, 0.5, FockTruncation(dim=24))
    assert rho.shape == (24, 24)
    with pytest.raises(TruncationError):
        displaced_thermal(2.0, 3.0, FockTruncation(dim=10))
    with pytest.raises(ParameterError):
        FockTruncation(dim=1)
    with pytest.raises(ParameterError):
        displaced_thermal(-0.1, 0.0)


def test_thermal_population_helper():
    p = thermal_populations(2.0, 200)
    assert p.sum() == pytest.approx(1.0)
    assert (np.arange(200) * p).sum() == pytest.approx(2.0)
    assert np.allclose(np.diag(number_operator(4)), [0, 1, 2, 3])


def test_trace_distance_examples():
    rng = np.random.default_rng(1)
    rho = random_density(4, rng)
    assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-14)
    a = np.diag([1.0, 0, 0])
    b = np.diag([0, 0, 1.0])
    assert trace_distance(a, b) == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        trace_distance(a, np.eye(2) / 2)


def test_trace_distance_bloch_formula():
    rng = np.random.default_rng(2)
    for _ in range(50):
        r, s = random_density(2, rng), random_density(2, rng)
        expected = np.linalg.norm(bloch_vector(r) - bloch_vector(s)) / 2
        assert trace_distance(r, s) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(2, 6))
def test_trace_distance_metric(seed, dim):
    rng = np.random.default_rng(seed)
    a, b, c = (random_density(dim, rng, rank=rng.integers(1, dim + 1)) for _ in range(3))
    dab = trace_distance(a, b)
    assert dab == pytest.approx(trace_distance(b, a), abs=1e-12)
    assert 0 <= dab <= 1 + 1e-12
    assert dab <= trace_distance(a, c) + trace_distance(c, b) + 1e-10
