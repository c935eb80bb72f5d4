"""Pulse-by-pulse error limits and capacities for BPSK signalling."""

import math

import numpy as np

from ._validation import ParameterError, check_positive
from .jc import JcConfig, transduce_bpsk

ENTROPY_CLAMP = -1e-12


def helstrom_bpsk(rmpn):
    """Minimum error probability for a single BPSK pulse."""
    rmpn = check_positive("rmpn", rmpn, allow_zero=True)
    # 1 - sqrt(1 - x) written to avoid cancellation for small x
    x = math.exp(-4 * rmpn)
    return 0.5 * x / (1 + math.sqrt(1 - x))


def n_helstrom(rmpn, n):
    """Best pulse-by-pulse error for the ``n - 1`` information bits of an ``n``-pulse codeword."""
    if n < 2:
        raise ParameterError("n must be at least 2")
    return 1 - (1 - helstrom_bpsk(rmpn)) ** (n - 1)


def binary_entropy(p):
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def c1_capacity(rmpn):
    """Capacity in bits per pulse with optimal single-pulse detection."""
    return 1 - binary_entropy(helstrom_bpsk(rmpn))


def von_neumann_entropy(rho):
    """Entropy in bits, with eigenvalues clamped at zero and ``0 log 0 = 0``."""
    vals = np.linalg.eigvalsh(np.asarray(rho))
    if vals.min() < ENTROPY_CLAMP:
        raise ParameterError(f"state has a negative eigenvalue {vals.min():.3g}")
    vals = vals[vals > 0]
    return float(-(vals * np.log2(vals)).sum())


def holevo(ensemble):
    """Holevo quantity of ``[(prior, rho), ...]`` in bits."""
    priors = np.array([p for p, _ in ensemble], dtype=float)
    states = [np.asarray(r) for _, r in ensemble]
    if np.any(priors < 0) or abs(priors.sum() - 1) > 1e-12:
        raise ParameterError("priors must be non-negative and sum to one")
    if len({s.shape for s in states}) != 1:
        raise ParameterError("ensemble states must share one dimension")
    mean = sum(p * s for p, s in zip(priors, states))
    chi = von_neumann_entropy(mean) - sum(p * von_neumann_entropy(s) for p, s in zip(priors, states))
    return max(chi, 0.0)


def holevo_bpsk_optical(rmpn):
    """Holevo quantity of the equiprobable pure pair ``|+beta>, |-beta>``."""
    rmpn = check_positive("rmpn", rmpn, allow_zero=True)
    return binary_entropy((1 - math.exp(-2 * rmpn)) / 2)


def capacity_config(cfg=None):
    """Interaction-time search used for capacities: window of 10/chi."""
    cfg = cfg or JcConfig()
    return JcConfig(chi=cfg.chi, time_window=10.0, grid_points=2 * cfg.grid_points - 1,
                    refine=cfg.refine)


def jdr_capacity(rmpn, channel, cfg=None):
    """Per-pulse Holevo quantity of the transduced qubit pair.

    The interaction time is chosen to maximize the Holevo quantity itself
    over the 10/chi window of ``capacity_config()`` unless ``cfg`` is given.
    """
    rmpn = check_positive("rmpn", rmpn, allow_zero=True)
    if rmpn == 0:
        return 0.0
    pair = transduce_bpsk(math.sqrt(rmpn), channel, cfg or capacity_config(), objective="holevo")
    return holevo([(0.5, pair.rho_plus), (0.5, pair.rho_minus)])


def rmpn_grid(start=1e-3, stop=10.0, num=40):
    return np.geomspace(start, stop, num)
