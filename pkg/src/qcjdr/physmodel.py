"""Optomechanical transducer model: steady states and the effective
optical-to-microwave channel of the sequential swap protocol.

All frequencies and rates are angular (rad/s), times in seconds and
temperatures in kelvin.
"""

import math
import warnings
from dataclasses import dataclass, asdict

import numpy as np
from scipy import constants, integrate

from ._validation import (
    ConsistencyError,
    ConvergenceError,
    NumericalError,
    ParameterError,
    check_positive,
)

TWO_PI = 2 * math.pi
STRONG_COUPLING_MARGIN = 10.0


@dataclass(frozen=True)
class TransducerParams:
    """Physical parameters of the optical cavity / mechanics / microwave cavity chain."""

    omega1: float = TWO_PI * 31e12
    omega2: float = TWO_PI * 10e6
    omega3: float = TWO_PI * 10e9
    kappa1: float = TWO_PI * 50e3
    kappa3: float = TWO_PI * 50e3
    gamma: float = TWO_PI * 500.0
    g1_max: float = TWO_PI * 10.0
    g3_max: float = TWO_PI * 5.0
    G1_max: float = TWO_PI * 1e6
    G3_max: float = TWO_PI * 1e6
    temperature: float = 1.0

    def __post_init__(self):
        for name in ("omega1", "omega2", "omega3", "G1_max", "G3_max", "temperature"):
            check_positive(name, getattr(self, name))
        # dissipation and bare couplings may be switched off entirely
        for name in ("kappa1", "kappa3", "gamma", "g1_max", "g3_max"):
            check_positive(name, getattr(self, name), allow_zero=True)
        if not self.omega1 > self.omega3 > self.omega2:
            raise ParameterError("frequencies must satisfy omega1 > omega3 > omega2")
        for j, G, kappa in ((1, self.G1_max, self.kappa1), (3, self.G3_max, self.kappa3)):
            if G < STRONG_COUPLING_MARGIN * max(kappa, self.gamma):
                warnings.warn(
                    f"G{j}_max={G:.3g} is not well inside the strong-coupling regime "
                    f"(< {STRONG_COUPLING_MARGIN:g} x max(kappa{j}, gamma))",
                    RuntimeWarning,
                    stacklevel=3,
                )

    @classmethod
    def fiducial(cls, temperature=1.0, **overrides):
        """Fiducial device of the reference design at the given temperature."""
        return cls(temperature=temperature, **overrides)

    def replace(self, **changes):
        values = asdict(self)
        values.update(changes)
        return type(self)(**values)

    @property
    def nbar(self):
        """Thermal occupation of the mechanical reservoir."""
        return thermal_occupation(self.omega2, self.temperature)


@dataclass(frozen=True)
class DriveConfig:
    E1: complex
    E3: complex
    delta1: float
    delta3: float


@dataclass(frozen=True)
class SteadyState:
    B1: complex
    B2: complex
    B3: complex
    Q2: float
    residual: float
    iterations: int


@dataclass(frozen=True)
class TransductionChannel:
    """Attenuation ``eta_tr`` and added thermal photons ``nbar_tr`` of the transfer."""

    eta_tr: float
    nbar_tr: float
    tau1: float = 0.0
    tau3: float = 0.0
    nbar0: float = 0.0

    def __post_init__(self):
        if not 0 < self.eta_tr <= 1:
            raise ParameterError(f"eta_tr must lie in (0, 1], got {self.eta_tr!r}")
        check_positive("nbar_tr", self.nbar_tr, allow_zero=True)

    @classmethod
    def ideal(cls):
        return cls(eta_tr=1.0, nbar_tr=0.0)

    def as_record(self):
        return asdict(self)


def thermal_occupation(omega, temperature):
    """Bose-Einstein occupation of a mode at angular frequency ``omega``."""
    check_positive("omega", omega)
    check_positive("temperature", temperature)
    x = constants.hbar * omega / (constants.k * temperature)
    return 1.0 / math.expm1(x)


def _amplitudes(params, drives, q2):
    b1 = -1j * drives.E1 / (params.kappa1 / 2 + 1j * (drives.delta1 - params.g1_max * q2))
    b3 = -1j * drives.E3 / (params.kappa3 / 2 + 1j * (drives.delta3 - params.g3_max * q2))
    b2 = (1j * params.g1_max / math.sqrt(2) * abs(b1) ** 2
          + 1j * params.g3_max / math.sqrt(2) * abs(b3) ** 2) / (1j * params.omega2 + params.gamma / 2)
    return b1, b2, b3


def _steady_residual(params, drives, b1, b2, b3, q2):
    r1, r2, r3 = _amplitudes(params, drives, q2)
    q2_new = math.sqrt(2) * r2.real
    res = [abs(r1 - b1) / max(abs(b1), 1e-300) if b1 else abs(r1),
           abs(r3 - b3) / max(abs(b3), 1e-300) if b3 else abs(r3),
           abs(q2_new - q2) / max(abs(q2), 1.0)]
    return max(res)


def steady_states(params, drives, max_iter=500, tol=1e-14):
    """Self-consistent steady-state amplitudes of the three driven modes.

    The cavity amplitudes depend on the mechanical displacement ``Q2``,
    which in turn depends on the cavity photon numbers; the scalar fixed
    point in ``Q2`` is found by direct iteration.
    """
    q2 = 0.0
    for it in range(1, max_iter + 1):
        _, b2, _ = _amplitudes(params, drives, q2)
        q2_new = math.sqrt(2) * b2.real
        step = abs(q2_new - q2)
        q2 = q2_new
        if step <= tol * max(abs(q2), 1.0):
            break
    b1, b2, b3 = _amplitudes(params, drives, q2)
    q2 = math.sqrt(2) * b2.real
    residual = _steady_residual(params, drives, b1, b2, b3, q2)
    if residual >= 1e-12:
        raise ConvergenceError(
            f"steady-state iteration did not converge (residual {residual:.3g})", residual
        )
    return SteadyState(b1, b2, b3, q2, residual, it)


def auto_detune(params, E1, E3, relaxation=0.5, max_iter=500, tol=1e-14):
    """Choose detunings so that the shifted cavity frequencies sit at omega2.

    Solves ``delta_j - g_j * Q2 = omega2`` self-consistently with a damped
    iteration, since ``Q2`` itself depends on the detunings.
    """
    q2 = 0.0
    for _ in range(max_iter):
        drives = DriveConfig(E1, E3, params.omega2 + params.g1_max * q2,
                             params.omega2 + params.g3_max * q2)
        state = steady_states(params, drives)
        step = state.Q2 - q2
        if abs(step) <= tol * max(abs(q2), 1.0):
            return drives
        q2 += relaxation * step
    raise ConvergenceError("detuning iteration did not converge", abs(step))


def drives_for_coupling(params):
    """Drive amplitudes giving ``g_j_max * |B_j| = G_j_max`` at auto-tuned detunings."""
    if params.g1_max == 0 or params.g3_max == 0:
        raise ParameterError("target couplings require nonzero bare couplings")
    # at the auto-tuned point the cavity response is |kappa/2 + i omega2|
    E1 = params.G1_max / params.g1_max * abs(params.kappa1 / 2 + 1j * params.omega2)
    E3 = params.G3_max / params.g3_max * abs(params.kappa3 / 2 + 1j * params.omega2)
    return auto_detune(params, E1, E3)


def drive_power(E, kappa, omega):
    """Drive power (W) corresponding to amplitude |E| = sqrt(2 P kappa / (hbar omega))."""
    return constants.hbar * omega * abs(E) ** 2 / (2 * kappa)


def _quad(func, upper):
    value, err = integrate.quad(func, 0.0, upper, epsabs=1e-12, epsrel=1e-12, limit=200)
    if not np.isfinite(value) or err > 1e-9:
        raise NumericalError(f"quadrature did not converge (error estimate {err:.3g})")
    return value


def transduction_channel(params, nbar0=None, *, compensation_time=None,
                         thermal_factor_in_alpha=False):
    """Loss and heating of the sequential-swap optical-to-microwave transfer.

    Parameters
    ----------
    params : TransducerParams
    nbar0 : float, optional
        Initial mechanical occupation. Defaults to the reservoir occupation.
    compensation_time : float, optional
        If given, include the extra loss ``exp(-kappa3 * t)`` of the drive
        that removes the steady-state microwave offset.
    thermal_factor_in_alpha : bool
        Use the optical mismatch ratio including ``sqrt(2 nbar0 + 1)``
        inside the ``alpha1`` weight as well as in the ``(1 + nu1**2)``
        term. The default keeps the thermal factor out of ``alpha1``.

    Returns
    -------
    TransductionChannel
    """
    nbar = params.nbar
    nbar0 = nbar if nbar0 is None else check_positive("nbar0", nbar0, allow_zero=True)
    k1, k3, gam = params.kappa1, params.kappa3, params.gamma
    G1, G3 = params.G1_max, params.G3_max

    tau1 = math.pi / (2 * G1)
    tau3 = math.pi / (2 * G3)
    th1 = (k1 + gam) / 2
    th3 = (k3 + gam) / 2
    nu1_bare = (k1 - gam) / (4 * G1)
    nu1 = nu1_bare * math.sqrt(2 * nbar0 + 1)
    nu3 = (k3 - gam) / (4 * G3)
    nu1_alpha = nu1 if thermal_factor_in_alpha else nu1_bare

    # integrate in the dimensionless swap angle s = G * t over [0, pi/2]
    half_pi = math.pi / 2
    alpha1 = _quad(lambda s: (math.cos(s) + nu1_alpha * math.sin(s)) ** 2
                   * math.exp(-th1 * s / (2 * G1)), half_pi) / G1
    beta3 = _quad(lambda s: (math.cos(s) - nu3 * math.sin(s)) ** 2
                  * math.exp(-th3 * s / (2 * G3)), half_pi) / G3
    mu1 = _quad(lambda s: math.sin(s) ** 2 * math.exp(-k1 * s / G1), half_pi) / G1
    mu3 = _quad(lambda s: math.sin(s) ** 2 * math.exp(-k3 * s / G3), half_pi) / G3

    decay = math.exp(-(th1 * tau1 + th3 * tau3))
    bath = gam * (2 * nbar + 1)
    nbar_tr = 0.5 * (decay * (1 + nu1**2) + k3 * beta3 + bath * mu3
                     + math.exp(-th3 * tau3) * (nu3**2 + k1 * mu1 + bath * alpha1) - 1)
    if nbar_tr < 0:
        if nbar_tr < -1e-9:
            raise ConsistencyError(f"negative added occupation {nbar_tr!r}")
        nbar_tr = 0.0

    eta_tr = decay
    if compensation_time is not None:
        eta_tr *= math.exp(-k3 * check_positive("compensation_time", compensation_time,
                                                allow_zero=True))
    return TransductionChannel(eta_tr=eta_tr, nbar_tr=nbar_tr, tau1=tau1, tau3=tau3,
                               nbar0=nbar0)


def insertion_efficiency(kappa1, pulse_width):
    """Input coupling efficiency of a unit-energy square pulse of width ``pulse_width``."""
    x = check_positive("kappa1", kappa1) * check_positive("pulse_width", pulse_width)
    return 2 * -math.expm1(-x / 2) / math.sqrt(x)
