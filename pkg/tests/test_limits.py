import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from qcjdr._validation import ParameterError
from qcjdr.decoder import codeword_states, make_codebook, optimize_unitary
from qcjdr.jc import JcConfig, transduce_bpsk
from qcjdr.limits import (
    binary_entropy,
    c1_capacity,
    capacity_config,
    helstrom_bpsk,
    holevo,
    holevo_bpsk_optical,
    jdr_capacity,
    n_helstrom,
    rmpn_grid,
    von_neumann_entropy,
)
from qcjdr.physmodel import TransductionChannel

from conftest import random_density


def test_helstrom_examples():
    assert helstrom_bpsk(0.0) == 0.5
    assert helstrom_bpsk(50.0) < 1e-80
    assert helstrom_bpsk(0.2) == pytest.approx(0.5 - 0.5 * math.sqrt(1 - math.exp(-0.8)), rel=1e-14)
    assert helstrom_bpsk(0.2) == pytest.approx(0.1290, abs=1e-4)


def test_helstrom_stable_for_large_rmpn():
    # the naive formula cancels to zero here
    assert helstrom_bpsk(10.0) == pytest.approx(math.exp(-40) / 4, rel=1e-10)


def test_n_helstrom_examples():
    assert n_helstrom(0.37, 2) == pytest.approx(helstrom_bpsk(0.37))
    assert n_helstrom(0.0, 3) == pytest.approx(0.75)
    assert n_helstrom(0.2, 3) == pytest.approx(0.2413, abs=2e-4)
    with pytest.raises(ParameterError):
        n_helstrom(0.2, 1)


def test_monotonicity():
    r = rmpn_grid()
    p = [helstrom_bpsk(x) for x in r]
    assert np.all(np.diff(p) < 0)
    for x in (0.01, 0.2, 1.0):
        vals = [n_helstrom(x, n) for n in range(2, 10)]
        assert np.all(np.diff(vals) > 0)


def test_c1_examples():
    assert c1_capacity(0.0) == 0.0
    assert c1_capacity(30.0) == pytest.approx(1.0, abs=1e-12)
    assert c1_capacity(0.2) == pytest.approx(1 - binary_entropy(0.1290), abs=5e-4)
    p = 0.5 - 0.5 * math.sqrt(1 - math.exp(-0.8))
    assert c1_capacity(0.2) == pytest.approx(1 - stats.entropy([p, 1 - p], base=2), abs=1e-12)
    assert c1_capacity(0.2) == pytest.approx(0.4454, abs=1e-4)
    assert binary_entropy(0.0) == binary_entropy(1.0) == 0.0


def test_holevo_examples():
    rng = np.random.default_rng(0)
    rho = random_density(3, rng)
    assert holevo([(0.3, rho), (0.7, rho)]) == pytest.approx(0.0, abs=1e-12)
    assert holevo([(0.5, np.diag([1.0, 0])), (0.5, np.diag([0, 1.0]))]) == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        holevo([(0.6, rho), (0.6, rho)])
    with pytest.raises(ParameterError):
        holevo([(0.5, rho), (0.5, np.eye(2) / 2)])


def test_optical_holevo_from_gram_matrix():
    for r in (0.01, 0.2, 1.5):
        # Gram matrix of |+b>, |-b> with overlap exp(-2 r)
        s = math.exp(-2 * r)
        gram = 0.5 * np.array([[1, s], [s, 1]])
        expected = von_neumann_entropy(gram)
        assert holevo_bpsk_optical(r) == pytest.approx(expected, abs=1e-12)


def test_c1_below_optical_holevo():
    for r in rmpn_grid():
        assert c1_capacity(r) <= holevo_bpsk_optical(r) + 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 5))
def test_qubit_holevo_bounds(seed, k):
    rng = np.random.default_rng(seed)
    priors = rng.dirichlet(np.ones(k))
    states = [random_density(2, rng) for _ in range(k)]
    chi = holevo(list(zip(priors, states)))
    assert -1e-12 <= chi <= 1 + 1e-12
    mean = sum(p * s for p, s in zip(priors, states))
    assert von_neumann_entropy(mean) <= 1 + 1e-12


def test_entropy_rejects_negative_states():
    with pytest.raises(ParameterError):
        von_neumann_entropy(np.diag([1.1, -0.1]))


def test_jdr_capacity_examples(cold_channel):
    ideal = TransductionChannel.ideal()
    assert jdr_capacity(0.0, ideal) == 0.0
    assert jdr_capacity(6.0, ideal) > 0.95
    r = 0.3
    a, b = jdr_capacity(r, ideal), jdr_capacity(r, cold_channel)
    assert a >= b
    assert b > c1_capacity(r)


def test_jdr_capacity_below_optical_holevo():
    for r in (0.05, 0.3, 1.0, 3.0):
        assert jdr_capacity(r, TransductionChannel.ideal()) <= holevo_bpsk_optical(r) + 1e-12


def test_capacity_window():
    cfg = capacity_config(JcConfig(chi=2.0))
    assert cfg.time_window == 10.0 and cfg.chi == 2.0


def test_unitary_matches_sdp_optimum(cold_channel):
    """Minimum-error discrimination SDP as an independent optimum for the
    codeword ensemble; the decoder measures only the label qubits, so its
    success probability can reach but never exceed the SDP value."""
    cp = pytest.importorskip("cvxpy")
    pair = transduce_bpsk(math.sqrt(0.2), cold_channel, JcConfig())
    book = make_codebook(2, 2, "random", seed=1)
    states = codeword_states(book, pair)
    d, M = states.shape[1], len(states)
    Y = cp.Variable((d, d), hermitian=True)
    cons = [Y - s / M >> 0 for s in states]
    prob = cp.Problem(cp.Minimize(cp.real(cp.trace(Y))), cons)
    prob.solve(solver=cp.SCS, eps=1e-9) if "SCS" in cp.installed_solvers() else prob.solve()
    res = optimize_unitary(states, book)
    assert res.J <= prob.value + 1e-5
    assert res.J == pytest.approx(prob.value, abs=1e-4)
