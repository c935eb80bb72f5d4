"""Truncated Fock-space states and operators for a single bosonic mode.

Density matrices are plain complex ``ndarray`` objects; see
``check_density_matrix`` for the invariants every returned state obeys.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats

from ._validation import (
    ParameterError,
    TruncationError,
    check_density_matrix,
    check_positive,
)

MIN_AUTO_DIM = 16
# keep the cropped block well away from the edge of the working space,
# where the truncated displacement generator is inaccurate
_EDGE_MARGIN = 30


@dataclass(frozen=True)
class FockTruncation:
    """Fock cutoff; ``dim=None`` selects the smallest adequate dimension."""

    dim: int = None
    leakage_tol: float = 1e-8

    def __post_init__(self):
        if self.dim is not None and self.dim < 2:
            raise ParameterError("Fock dimension must be at least 2")
        check_positive("leakage_tol", self.leakage_tol)


def annihilation(dim):
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def number_operator(dim):
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def coherent_tail(alpha, dim):
    """Probability mass of the coherent state |alpha> outside the first ``dim`` levels."""
    return float(stats.poisson.sf(dim - 1, abs(alpha) ** 2))


def displacement_operator(alpha, dim, leakage_tol=1e-8):
    """Truncated displacement operator ``exp(alpha b^+ - alpha^* b)``.

    The generator is truncated before exponentiation, so the result is
    exactly unitary; its action on low Fock states is accurate as long
    as the coherent amplitude fits inside ``dim``.
    """
    if dim < 2:
        raise ParameterError("dim must be at least 2")
    if alpha == 0:
        return np.eye(dim, dtype=complex)
    leak = coherent_tail(alpha, dim)
    if leak > leakage_tol:
        raise TruncationError(
            f"dim={dim} too small for |alpha|={abs(alpha):.3g} (leakage {leak:.2g})"
        )
    b = annihilation(dim)
    return linalg.expm(alpha * b.conj().T - np.conj(alpha) * b)


def thermal_populations(nbar, dim):
    n = np.arange(dim)
    if nbar == 0:
        return (n == 0).astype(float)
    return (nbar / (nbar + 1)) ** n / (nbar + 1)


def _tail_cut(pops, leakage_tol):
    """Smallest k such that both the mass and the energy beyond k are below tol."""
    n = np.arange(len(pops))
    mass_tail = np.cumsum(pops[::-1])[::-1]
    energy_tail = np.cumsum((n * pops)[::-1])[::-1]
    ok = (mass_tail < leakage_tol) & (energy_tail < leakage_tol)
    idx = np.flatnonzero(ok)
    return int(idx[0]) if idx.size else len(pops)


def displaced_thermal(nbar, alpha0, trunc=None):
    """Thermal state of occupation ``nbar`` displaced to amplitude ``alpha0``.

    The state is built in a padded working space, the photon-number tail
    is inspected, and the result is cropped to ``trunc.dim`` (or the
    automatically chosen cutoff) and renormalized.
    """
    trunc = trunc or FockTruncation()
    nbar = check_positive("nbar", nbar, allow_zero=True)
    a2 = abs(alpha0) ** 2
    mean = a2 + nbar
    std = math.sqrt(nbar * (nbar + 1) + a2 * (2 * nbar + 1))
    work = max(2 * MIN_AUTO_DIM, math.ceil(mean + 12 * std) + _EDGE_MARGIN + 10)
    if trunc.dim is not None:
        work = max(work, trunc.dim + _EDGE_MARGIN)

    while True:
        b = annihilation(work)
        D = linalg.expm(alpha0 * b.conj().T - np.conj(alpha0) * b) if alpha0 else np.eye(work)
        rho = (D * thermal_populations(nbar, work)) @ D.conj().T
        pops = np.clip(np.diag(rho).real, 0, None)
        cut = max(MIN_AUTO_DIM, _tail_cut(pops, trunc.leakage_tol))
        if cut <= work - _EDGE_MARGIN:
            break
        work *= 2

    if trunc.dim is not None:
        if cut > trunc.dim:
            leak = pops[trunc.dim:].sum()
            raise TruncationError(
                f"dim={trunc.dim} leaks {leak:.2g} of the state; use dim >= {cut}"
            )
        cut = trunc.dim

    out = rho[:cut, :cut]
    out = 0.5 * (out + out.conj().T)
    out /= np.trace(out).real
    return check_density_matrix(out, "displaced thermal state")


def mean_photon_number(rho):
    return float(np.real(np.sum(np.diag(rho) * np.arange(rho.shape[0]))))


def purity(rho):
    return float(np.real(np.vdot(rho, rho)))


def trace_distance(rho, sigma):
    """Half the trace norm of ``rho - sigma``."""
    rho = np.asarray(rho)
    sigma = np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise ParameterError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    diff = rho - sigma
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())
