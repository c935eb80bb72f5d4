"""Microwave-mode to qubit transfer by resonant Jaynes-Cummings evolution.

Qubit states use the computational basis with ``|0> = |g>`` and
``|1> = |e>``; joint field-qubit states are ordered ``field (x) qubit``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ._validation import (
    ParameterError,
    TruncationError,
    check_density_matrix,
    check_positive,
)
from .fock import FockTruncation, displaced_thermal, trace_distance

DEFAULT_CHI = 2 * math.pi * 10e6


@dataclass(frozen=True)
class JcConfig:
    """Qubit-mode coupling and interaction-time search settings.

    ``time_window`` is in units of ``1/chi``.
    """

    chi: float = DEFAULT_CHI
    time_window: float = 5.0
    grid_points: int = 2001
    refine: bool = True

    def __post_init__(self):
        check_positive("chi", self.chi)
        check_positive("time_window", self.time_window)
        if self.grid_points < 3:
            raise ParameterError("grid_points must be at least 3")

    @property
    def grid_step(self):
        return self.time_window / self.chi / (self.grid_points - 1)


@dataclass(frozen=True)
class TransducedPair:
    rho_plus: np.ndarray
    rho_minus: np.ndarray
    t_star: float
    tau: float

    def bloch_vectors(self):
        return bloch_vector(self.rho_plus), bloch_vector(self.rho_minus)


def bloch_vector(rho):
    rho = np.asarray(rho)
    return np.array([2 * rho[0, 1].real, -2 * rho[0, 1].imag, (rho[0, 0] - rho[1, 1]).real])


def _ground_start_qubit(field, chi_t):
    """Reduced qubit states after JC evolution from ``field (x) |g><g|``.

    In the ``|n, g> <-> |n-1, e>`` blocks the evolution is a rotation by
    ``chi t sqrt(n)``, which gives the qubit state in closed form.
    Vectorized over ``chi_t``; returns shape ``(len(chi_t), 2, 2)``.
    """
    chi_t = np.atleast_1d(np.asarray(chi_t, dtype=float))
    dim = field.shape[0]
    root = np.sqrt(np.arange(dim))
    phase = np.outer(chi_t, root)
    c, s = np.cos(phase), np.sin(phase)
    pops = np.diag(field).real
    coh = np.diag(field, -1)  # <k+1|rho|k>
    out = np.empty((chi_t.size, 2, 2), dtype=complex)
    out[:, 0, 0] = (c**2) @ pops
    out[:, 1, 1] = (s**2) @ pops
    out[:, 1, 0] = -1j * (s[:, 1:] * c[:, :-1]) @ coh
    out[:, 0, 1] = out[:, 1, 0].conj()
    return out


def jc_propagator(dim, chi_t):
    """Joint unitary ``exp(-i t chi (b s+ + b^+ s-))`` on a truncated mode."""
    U = np.zeros((2 * dim, 2 * dim), dtype=complex)
    # the top level |dim-1, e> has no partner inside the truncation
    U[2 * (dim - 1) + 1, 2 * (dim - 1) + 1] = 1.0
    U[0, 0] = 1.0
    for n in range(1, dim):
        g, e = 2 * n, 2 * (n - 1) + 1
        angle = chi_t * math.sqrt(n)
        U[g, g] = U[e, e] = math.cos(angle)
        U[g, e] = U[e, g] = -1j * math.sin(angle)
    return U


def jc_evolve_joint(field, qubit, t, chi, leakage_tol=1e-8):
    """Evolve ``field (x) qubit`` and return the full joint density matrix."""
    field = np.asarray(field, dtype=complex)
    qubit = np.asarray(qubit, dtype=complex)
    dim = field.shape[0]
    rho = np.kron(field, qubit)
    top = rho[2 * dim - 1, 2 * dim - 1].real
    if top > leakage_tol:
        raise TruncationError(f"population {top:.2g} at the truncation edge couples out")
    U = jc_propagator(dim, chi * t)
    return U @ rho @ U.conj().T


def partial_trace_field(joint):
    dim = joint.shape[0] // 2
    return np.einsum("aiaj->ij", joint.reshape(dim, 2, dim, 2))


def jc_evolve(field, t, chi):
    """Qubit state after interaction time ``t`` with the qubit starting in ``|g>``."""
    field = check_density_matrix(field, "field")
    check_positive("chi", chi)
    if t < 0:
        raise ParameterError("interaction time must be non-negative")
    return _ground_start_qubit(field, chi * t)[0]


def _pair_trace_distance(plus, minus):
    # the difference of two unit-trace 2x2 states is traceless
    d = plus - minus
    return np.sqrt(d[..., 0, 0].real ** 2 + np.abs(d[..., 0, 1]) ** 2)


def _qubit_entropy(rho):
    r = np.sqrt((rho[..., 0, 0] - rho[..., 1, 1]).real ** 2 + 4 * np.abs(rho[..., 0, 1]) ** 2)
    lam = np.clip(np.stack([(1 + r) / 2, (1 - r) / 2]), 1e-300, 1.0)
    return -(lam * np.log2(lam)).sum(axis=0)


def _pair_holevo(plus, minus):
    return _qubit_entropy(0.5 * (plus + minus)) - 0.5 * (_qubit_entropy(plus) + _qubit_entropy(minus))


_OBJECTIVES = {"trace_distance": _pair_trace_distance, "holevo": _pair_holevo}


def transduce_bpsk(beta, channel, cfg=None, trunc=None, objective="trace_distance"):
    """Transduce the BPSK pair ``|+beta>, |-beta>`` into qubit states.

    The interaction time is chosen on a grid over ``[0, window/chi]``
    maximizing ``objective`` (the trace distance, or the Holevo quantity
    of the equiprobable pair), then optionally polished with a bounded
    golden-section search around the best grid point.
    """
    cfg = cfg or JcConfig()
    try:
        score = _OBJECTIVES[objective]
    except KeyError:
        raise ParameterError(f"unknown objective {objective!r}") from None
    trunc = trunc or FockTruncation()
    amp = math.sqrt(channel.eta_tr) * complex(beta)
    f_plus = displaced_thermal(channel.nbar_tr, amp, trunc)
    f_minus = displaced_thermal(channel.nbar_tr, -amp, FockTruncation(f_plus.shape[0], trunc.leakage_tol))

    chi_ts = np.linspace(0.0, cfg.time_window, cfg.grid_points)
    taus = score(_ground_start_qubit(f_plus, chi_ts), _ground_start_qubit(f_minus, chi_ts))
    best = int(np.argmax(taus))
    chi_t = chi_ts[best]
    if cfg.refine and taus[best] > 0:
        lo = chi_ts[max(best - 1, 0)]
        hi = chi_ts[min(best + 1, len(chi_ts) - 1)]

        def neg_tau(x):
            return -score(_ground_start_qubit(f_plus, x), _ground_start_qubit(f_minus, x))[0]

        res = optimize.minimize_scalar(neg_tau, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12})
        if -res.fun > taus[best]:
            chi_t = float(res.x)

    rho_p = _ground_start_qubit(f_plus, chi_t)[0]
    rho_m = _ground_start_qubit(f_minus, chi_t)[0]
    return TransducedPair(rho_p, rho_m, chi_t / cfg.chi, trace_distance(rho_p, rho_m))


def optimal_time_reference(mpn_coherent, nbar_tr, chi):
    """Approximate optimal interaction time from the two-regime fit.

    ``mpn_coherent`` is ``eta_tr |beta|^2``. Below a microwave mean photon
    number of 1/6 the time is ``pi/(2 chi)``; above 1/4 it follows
    ``pi / (4 chi sqrt(mpn_coherent + 1.5 nbar_tr))``; in between the two
    branches are interpolated linearly in the photon number.
    """
    check_positive("mpn_coherent", mpn_coherent, allow_zero=True)
    check_positive("nbar_tr", nbar_tr, allow_zero=True)
    check_positive("chi", chi)
    mpn = mpn_coherent + nbar_tr
    low = math.pi / (2 * chi)
    if mpn <= 1 / 6:
        return low
    high = math.pi / (4 * chi * math.sqrt(mpn_coherent + 1.5 * nbar_tr))
    if mpn >= 1 / 4:
        return high
    w = (mpn - 1 / 6) / (1 / 4 - 1 / 6)
    return (1 - w) * low + w * high
